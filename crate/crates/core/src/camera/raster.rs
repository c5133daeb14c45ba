use crate::error::{Error, Result};

/// Single-channel probability raster, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::param(
                "raster",
                format!("{} values for a {width}x{height} raster", data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param(
                "raster",
                format!("value {} at index {i} outside [0, 1]", data[i]),
            ));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Bilinear interpolation between pixel centers, clamped at the borders.
    pub fn sample(&self, u: f64, v: f64) -> Result<f64> {
        let (w, h) = (self.width, self.height);
        if !((0.0..w as f64).contains(&u) && (0.0..h as f64).contains(&v)) {
            return Err(Error::OutOfBounds { u, v, width: w, height: h });
        }
        let x = u - 0.5;
        let y = v - 0.5;
        let x0 = x.floor();
        let y0 = y.floor();
        let tx = x - x0;
        let ty = y - y0;
        let clamp = |i: f64, n: u32| i.clamp(0.0, (n - 1) as f64) as u32;
        let (xa, xb) = (clamp(x0, w), clamp(x0 + 1.0, w));
        let (ya, yb) = (clamp(y0, h), clamp(y0 + 1.0, h));
        let top = self.get(xa, ya) as f64 * (1.0 - tx) + self.get(xb, ya) as f64 * tx;
        let bottom = self.get(xa, yb) as f64 * (1.0 - tx) + self.get(xb, yb) as f64 * tx;
        Ok(top * (1.0 - ty) + bottom * ty)
    }

    pub fn scaled(&self, s: f32) -> Result<Self> {
        Self::new(self.width, self.height, self.data.iter().map(|v| v * s).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_raster() {
        let r = Raster::filled(7, 5, 0.7).unwrap();
        for (u, v) in [(0.0, 0.0), (3.3, 2.2), (6.99, 4.99)] {
            assert!((r.sample(u, v).unwrap() - 0.7).abs() < 1e-6);
        }
    }

    #[test]
    fn pixel_centers_return_stored_values() {
        let r = Raster::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(r.sample(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(r.sample(1.5, 0.5).unwrap(), 1.0);
        assert_eq!(r.sample(0.5, 1.5).unwrap(), 0.0);
        assert_eq!(r.sample(1.5, 1.5).unwrap(), 1.0);
    }

    #[test]
    fn midpoint_between_rows() {
        // rows [0, 0] and [1, 1]; halfway between the row centers.
        let r = Raster::new(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.sample(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(r.sample(0.5, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let r = Raster::filled(2, 2, 0.0).unwrap();
        assert!(r.sample(2.0, 0.0).is_err());
        assert!(r.sample(-0.1, 0.0).is_err());
    }

    #[test]
    fn rejects_values_outside_unit_interval() {
        assert!(Raster::new(1, 1, vec![1.5]).is_err());
        assert!(Raster::new(1, 2, vec![0.5]).is_err());
    }

    proptest! {
        #[test]
        fn sample_stays_within_neighbor_range(
            data in proptest::collection::vec(0.0f32..=1.0, 12),
            u in 0.0..4.0f64, v in 0.0..3.0f64,
        ) {
            let r = Raster::new(4, 3, data).unwrap();
            let s = r.sample(u, v).unwrap();
            let x = (u - 0.5).floor();
            let y = (v - 0.5).floor();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (dx, dy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                let xi = (x + dx).clamp(0.0, 3.0) as u32;
                let yi = (y + dy).clamp(0.0, 2.0) as u32;
                let val = r.get(xi, yi) as f64;
                lo = lo.min(val);
                hi = hi.max(val);
            }
            prop_assert!(s >= lo - 1e-12 && s <= hi + 1e-12);
        }
    }
}
