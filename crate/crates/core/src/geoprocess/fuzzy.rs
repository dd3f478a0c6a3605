use crate::error::{Error, Result};
use crate::raster::Grid;

/// Default spread for the Small and Large membership functions.
pub const DEFAULT_SPREAD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuzzyShape {
    LinearIncreasing,
    LinearDecreasing,
    Small,
    Large,
}

impl FuzzyShape {
    pub fn name(self) -> &'static str {
        match self {
            FuzzyShape::LinearIncreasing => "linear_increasing",
            FuzzyShape::LinearDecreasing => "linear_decreasing",
            FuzzyShape::Small => "small",
            FuzzyShape::Large => "large",
        }
    }

    pub fn parse(s: &str) -> Option<FuzzyShape> {
        Some(match s {
            "linear_increasing" => FuzzyShape::LinearIncreasing,
            "linear_decreasing" => FuzzyShape::LinearDecreasing,
            "small" => FuzzyShape::Small,
            "large" => FuzzyShape::Large,
            _ => return None,
        })
    }
}

/// Membership function parameters.
///
/// For the linear shapes `a` is the minimum and `b` the maximum. For Small
/// and Large `a` is the midpoint (membership 0.5) and `b` the spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzyParams {
    pub shape: FuzzyShape,
    pub a: f64,
    pub b: f64,
}

impl FuzzyParams {
    pub fn new(shape: FuzzyShape, a: f64, b: f64) -> Result<Self> {
        let p = FuzzyParams { shape, a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.a.is_finite() && self.b.is_finite();
        let ok = finite
            && match self.shape {
                FuzzyShape::LinearIncreasing | FuzzyShape::LinearDecreasing => self.a < self.b,
                FuzzyShape::Small | FuzzyShape::Large => self.a > 0.0 && self.b > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "invalid fuzzy parameters for {}: a={}, b={}",
                self.shape.name(),
                self.a,
                self.b
            )))
        }
    }

    /// Membership of a single value.
    pub fn membership(&self, x: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        match self.shape {
            FuzzyShape::LinearIncreasing => ((x - a) / (b - a)).clamp(0.0, 1.0),
            FuzzyShape::LinearDecreasing => ((b - x) / (b - a)).clamp(0.0, 1.0),
            FuzzyShape::Small => {
                let x = if x <= 0.0 { 1e-12 * a } else { x };
                1.0 / (1.0 + (x / a).powf(b))
            }
            FuzzyShape::Large => {
                let x = if x <= 0.0 { 1e-12 * a } else { x };
                1.0 / (1.0 + (x / a).powf(-b))
            }
        }
    }
}

/// Maps every valid cell through the membership function.
pub fn fuzzy_normalize(grid: &Grid, params: &FuzzyParams) -> Result<Grid> {
    params.validate()?;
    grid.map_valid(|x| params.membership(x))
}

/// 1 where `value >= threshold`, else 0; nodata passes through.
pub fn classify_threshold(grid: &Grid, threshold: f64) -> Result<Grid> {
    grid.map_valid(|v| if v >= threshold { 1.0 } else { 0.0 })
}

/// Multiplies every valid cell by -1.
pub fn negate(grid: &Grid) -> Result<Grid> {
    grid.map_valid(|v| -v)
}

/// Equal-interval quantization of the valid range into `classes` bins.
/// Each cell takes the midpoint value of its bin, so units are preserved.
pub fn equal_interval_bins(grid: &Grid, classes: usize) -> Result<Grid> {
    if classes == 0 {
        return Err(Error::Input("class count must be positive".into()));
    }
    let Some((lo, hi)) = grid.value_range() else {
        return Ok(grid.clone());
    };
    if hi <= lo {
        return Ok(grid.clone());
    }
    let width = (hi - lo) / classes as f64;
    grid.map_valid(|v| {
        let k = (((v - lo) / width).floor() as usize).min(classes - 1);
        lo + (k as f64 + 0.5) * width
    })
}
