//! Adaptive cubature over axis-aligned boxes.
//!
//! Each box is estimated by the composite midpoint rule on its `3^d`
//! sub-boxes. A box whose probe values are all identical is accepted as is
//! (exact for integrands constant on the box). Otherwise it is split in
//! half along every axis. For continuous integrands the children's estimate
//! replaces the parent's once the two agree to `tol · volume`; indicator
//! integrands keep refining mixed boxes down to the depth limit.
//! Midpoint rules are exact on affine pieces, so piecewise-linear
//! integrands converge quickly away from their kinks.

/// Lattice fractions of the 3-point midpoint rule; all strictly interior.
const PROBES: [f64; 3] = [1.0 / 6.0, 0.5, 5.0 / 6.0];
const CORNER: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct Cubature {
    pub tol: f64,
    pub min_depth: u32,
    pub max_depth: u32,
    /// Accept a mixed box once parent and children agree; off for indicators.
    pub continuous: bool,
}

impl Cubature {
    pub fn for_dim(d: usize, tol: f64) -> Self {
        let max_depth = match d {
            1 => 24,
            2 => 10,
            3 => 6,
            4 => 4,
            _ => 2,
        };
        Self {
            tol,
            min_depth: 1.min(max_depth),
            max_depth,
            continuous: true,
        }
    }

    pub fn indicator(d: usize, tol: f64) -> Self {
        Self {
            continuous: false,
            ..Self::for_dim(d, tol)
        }
    }

    pub fn integrate<G: FnMut(&[f64]) -> f64>(&self, lo: &[f64], hi: &[f64], g: &mut G) -> f64 {
        let mut scratch = vec![0.0; lo.len()];
        let (est, uniform) = probe(lo, hi, g, &mut scratch);
        self.refine(lo, hi, est, uniform, 0, g, &mut scratch)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine<G: FnMut(&[f64]) -> f64>(
        &self,
        lo: &[f64],
        hi: &[f64],
        est: f64,
        uniform: bool,
        depth: u32,
        g: &mut G,
        scratch: &mut [f64],
    ) -> f64 {
        if depth >= self.max_depth || (uniform && depth >= self.min_depth) {
            return est;
        }
        let d = lo.len();
        let vol: f64 = lo.iter().zip(hi).map(|(l, h)| h - l).product();
        let mut children = Vec::with_capacity(1 << d);
        let mut fine = 0.0;
        let mut all_uniform = true;
        for mask in 0..(1usize << d) {
            let mut clo = lo.to_vec();
            let mut chi = hi.to_vec();
            for a in 0..d {
                let mid = 0.5 * (lo[a] + hi[a]);
                if mask >> a & 1 == 0 {
                    chi[a] = mid;
                } else {
                    clo[a] = mid;
                }
            }
            let (e, u) = probe(&clo, &chi, g, scratch);
            fine += e;
            all_uniform &= u;
            children.push((clo, chi, e, u));
        }
        if depth + 1 >= self.min_depth
            && (all_uniform || (self.continuous && (fine - est).abs() <= self.tol * vol))
        {
            return fine;
        }
        children
            .into_iter()
            .map(|(clo, chi, e, u)| self.refine(&clo, &chi, e, u, depth + 1, g, scratch))
            .sum()
    }
}

/// Midpoint estimate over the `3^d` lattice and whether every probe agreed.
fn probe<G: FnMut(&[f64]) -> f64>(lo: &[f64], hi: &[f64], g: &mut G, x: &mut [f64]) -> (f64, bool) {
    let d = lo.len();
    let n = 3usize.pow(d as u32);
    let mut sum = 0.0;
    let mut first = None;
    let mut uniform = true;
    for k in 0..n {
        let mut r = k;
        for a in 0..d {
            x[a] = lo[a] + (hi[a] - lo[a]) * PROBES[r % 3];
            r /= 3;
        }
        let v = g(x);
        match first {
            None => first = Some(v),
            Some(f) => uniform &= v == f,
        }
        sum += v;
    }
    // Points just inside the corners do not enter the estimate but must
    // agree too, so that a box clipped near a corner is not taken as
    // uniform. They stay off the faces, which belong to neighbouring cells.
    if let Some(f) = first {
        for mask in 0..(1usize << d) {
            if !uniform {
                break;
            }
            for a in 0..d {
                x[a] = lo[a] + (hi[a] - lo[a]) * if mask >> a & 1 == 0 { CORNER } else { 1.0 - CORNER };
            }
            uniform &= g(x) == f;
        }
    }
    let vol: f64 = lo.iter().zip(hi).map(|(l, h)| h - l).product();
    (vol * sum / n as f64, uniform)
}
