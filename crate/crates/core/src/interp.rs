//! Quintic Hermite interpolation on a uniform lattice.

/// Samples of a C² function (value, first and second derivative) on a uniform grid.
#[derive(Debug, Clone)]
pub struct HermiteTable {
    x0: f64,
    h: f64,
    f: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl HermiteTable {
    pub fn new(x0: f64, h: f64, f: Vec<f64>, d1: Vec<f64>, d2: Vec<f64>) -> Self {
        assert!(f.len() >= 2 && f.len() == d1.len() && f.len() == d2.len());
        HermiteTable { x0, h, f, d1, d2 }
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.f.len() - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn node(&self, i: usize) -> (f64, f64, f64, f64) {
        (self.x0 + self.h * i as f64, self.f[i], self.d1[i], self.d2[i])
    }

    /// Value and first derivative at `x` (clamped to the table range).
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.f.len();
        let s = ((x - self.x0) / self.h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        let h = self.h;
        let (p0, p1) = (self.f[i], self.f[i + 1]);
        let (m0, m1) = (self.d1[i] * h, self.d1[i + 1] * h);
        let (c0, c1) = (self.d2[i] * h * h, self.d2[i + 1] * h * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h21 = 0.5 * (t3 - 2.0 * t4 + t5);
        let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let d00 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
        let d10 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
        let d20 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
        let d21 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
        let d11 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
        let d01 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
        let v = h00 * p0 + h10 * m0 + h20 * c0 + h21 * c1 + h11 * m1 + h01 * p1;
        let dv = (d00 * p0 + d10 * m0 + d20 * c0 + d21 * c1 + d11 * m1 + d01 * p1) / h;
        (v, dv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_smooth_function() {
        let n = 41;
        let h = 0.1;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let t = HermiteTable::new(
            0.0,
            h,
            xs.iter().map(|x| x.sin()).collect(),
            xs.iter().map(|x| x.cos()).collect(),
            xs.iter().map(|x| -x.sin()).collect(),
        );
        for k in 0..400 {
            let x = k as f64 * 0.00999;
            let (v, d) = t.eval(x);
            assert!((v - x.sin()).abs() < 1e-10);
            assert!((d - x.cos()).abs() < 1e-8);
        }
        let (v, _) = t.eval(2.0);
        assert!((v - 2f64.sin()).abs() < 1e-14);
    }
}
