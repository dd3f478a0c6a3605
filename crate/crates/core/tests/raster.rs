use std::path::Path;

use petromap::raster::{
    assert_aligned, format_ascii_grid, parse_ascii_grid, read_ascii_grid, write_ascii_grid, Grid,
    GridHeader,
};
use petromap::Error;
use proptest::prelude::*;

fn parse(text: &str) -> petromap::Result<Grid> {
    parse_ascii_grid(text, Path::new("t.asc"))
}

#[test]
fn reads_header_variants() {
    let g = parse(
        "NCOLS 3\nnrows 2\nXLLCENTER 0.5\nyllcenter 10.5\ncellsize 1\nNODATA_value -1\n1 2 3\n-1 5 6\n",
    )
    .unwrap();
    let h = g.header();
    assert_eq!((h.ncols, h.nrows), (3, 2));
    assert_eq!((h.xll, h.yll), (0.0, 10.0));
    assert_eq!(h.nodata, -1.0);
    assert_eq!(g.get(0, 0), Some(1.0));
    assert_eq!(g.get(1, 0), None);
    assert_eq!(g.valid_cells().count(), 5);

    // NODATA_value may be omitted; values may wrap across lines.
    let g = parse("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 2\n1 2\n3\n4\n").unwrap();
    assert_eq!(g.header().nodata, -9999.0);
    assert_eq!(g.values(), &[1.0, 2.0, 3.0, 4.0]);
    // top row first: row 0 is the northern row
    let (_, y_top) = g.header().cell_center(0, 0);
    let (_, y_bottom) = g.header().cell_center(1, 0);
    assert!(y_top > y_bottom);
}

#[test]
fn parse_errors_name_the_line() {
    let base = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n";
    let cases = [
        format!("{base}1 2 3\n"),
        format!("{base}1 2\n3 x\n"),
        "ncols 2\nnrows 2\nxllcorner 0\ncellsize 1\n1 2 3 4\n".to_string(),
        format!("{base}1 2 3 4 5\n"),
        "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize -1\n1 2 3 4\n".to_string(),
    ];
    for text in &cases {
        match parse(text) {
            Err(Error::Parse { line, .. }) => assert!(line >= 1, "{text}"),
            Err(Error::Dimension(_)) | Err(Error::Input(_)) => {}
            other => panic!("expected an error for {text:?}, got {other:?}"),
        }
    }
    match parse(&format!("{base}1 2\n3 x\n")) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
        other => panic!("{other:?}"),
    }
}

#[test]
fn alignment_names_the_field() {
    let h = GridHeader::new(4, 3, 0.0, 0.0, 10.0).unwrap();
    let a = Grid::filled(h, 1.0).unwrap();
    let b = Grid::filled(GridHeader::new(4, 3, 0.0, 0.0, 10.0 + 1e-12).unwrap(), 1.0).unwrap();
    assert!(assert_aligned(&[&a, &b]).is_ok());
    let c = Grid::filled(GridHeader::new(4, 3, 5.0, 0.0, 10.0).unwrap(), 1.0).unwrap();
    match assert_aligned(&[&a, &b, &c]) {
        Err(Error::Alignment { index, field }) => {
            assert_eq!(index, 2);
            assert_eq!(field, "xll");
        }
        other => panic!("{other:?}"),
    }
    let d = Grid::filled(GridHeader::new(3, 3, 0.0, 0.0, 10.0).unwrap(), 1.0).unwrap();
    assert!(matches!(assert_aligned(&[&a, &d]), Err(Error::Alignment { index: 1, .. })));
}

#[test]
fn focal_window_edges() {
    let h = GridHeader::new(3, 3, 0.0, 0.0, 1.0).unwrap();
    let g = Grid::new(h, (0..9).map(f64::from).collect()).unwrap();
    let w = g.focal_window(0, 0).unwrap();
    assert_eq!(w[0], [None, None, None]);
    assert_eq!(w[1], [None, Some(0.0), Some(1.0)]);
    assert_eq!(w[2], [None, Some(3.0), Some(4.0)]);
    assert!(matches!(g.focal_window(3, 0), Err(Error::Index { .. })));
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let h = GridHeader::new(5, 4, 100.5, -20.25, 0.1).unwrap().with_nodata(-32768.0);
    let g = Grid::from_fn(h, |r, c| (r != c).then(|| (r * 10 + c) as f64 / 3.0)).unwrap();
    let path = dir.path().join("g.asc");
    write_ascii_grid(&g, &path).unwrap();
    let back = read_ascii_grid(&path).unwrap();
    assert_eq!(back, g);
    // no temp files are left behind
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    assert!(matches!(read_ascii_grid(dir.path().join("missing.asc")), Err(Error::Io { .. })));
}

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (
        1usize..12,
        1usize..12,
        -1e6f64..1e6,
        -1e6f64..1e6,
        1e-3f64..1e4,
        prop_oneof![Just(-9999.0), -1e9f64..-1e8],
    )
        .prop_flat_map(|(nc, nr, xll, yll, cs, nodata)| {
            let cells = proptest::collection::vec(
                prop_oneof![
                    8 => any::<f64>().prop_filter("finite", |v| v.is_finite()),
                    2 => -1e3f64..1e3,
                    1 => Just(f64::NAN),
                ],
                nc * nr,
            );
            cells.prop_map(move |vals| {
                let h = GridHeader::new(nc, nr, xll, yll, cs).unwrap().with_nodata(nodata);
                // NaN marks a nodata cell in the generator only.
                let vals = vals
                    .into_iter()
                    .map(|v| if v.is_nan() { nodata } else { v })
                    .collect();
                Grid::new(h, vals).unwrap()
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ascii_round_trip_is_lossless(g in grid_strategy()) {
        let text = format_ascii_grid(&g);
        let back = parse(&text).unwrap();
        prop_assert_eq!(back.header(), g.header());
        for (a, b) in back.values().iter().zip(g.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(format_ascii_grid(&back), text);
    }
}
