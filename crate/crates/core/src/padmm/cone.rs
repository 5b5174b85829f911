//! The feasible set of constraint reactions: a Cartesian product of free
//! (bilateral), non-negative orthant (limit) and Coulomb-cone (contact) groups.

/// One group of consecutive rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConeGroup {
    Bilateral { start: usize, len: usize },
    NonNegative { start: usize, len: usize },
    /// Three rows `(normal, t1, t2)` with `‖t‖ ≤ μ·n`.
    Soc { start: usize, mu: f64 },
}

impl ConeGroup {
    pub fn start(&self) -> usize {
        match *self {
            ConeGroup::Bilateral { start, .. } | ConeGroup::NonNegative { start, .. } | ConeGroup::Soc { start, .. } => start,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            ConeGroup::Bilateral { len, .. } | ConeGroup::NonNegative { len, .. } => len,
            ConeGroup::Soc { .. } => 3,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConeProduct {
    groups: Vec<ConeGroup>,
    dim: usize,
}

impl ConeProduct {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn groups(&self) -> &[ConeGroup] {
        &self.groups
    }

    /// Append a free group; adjacent free rows merge into one group.
    pub fn push_bilateral(&mut self, len: usize) {
        if len == 0 {
            return;
        }
        if let Some(ConeGroup::Bilateral { len: l, .. }) = self.groups.last_mut() {
            *l += len;
        } else {
            self.groups.push(ConeGroup::Bilateral { start: self.dim, len });
        }
        self.dim += len;
    }

    pub fn push_nonnegative(&mut self, len: usize) {
        if len == 0 {
            return;
        }
        if let Some(ConeGroup::NonNegative { len: l, .. }) = self.groups.last_mut() {
            *l += len;
        } else {
            self.groups.push(ConeGroup::NonNegative { start: self.dim, len });
        }
        self.dim += len;
    }

    pub fn push_soc(&mut self, mu: f64) {
        self.groups.push(ConeGroup::Soc { start: self.dim, mu });
        self.dim += 3;
    }

    pub fn soc_groups(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.groups.iter().filter_map(|g| match *g {
            ConeGroup::Soc { start, mu } => Some((start, mu)),
            _ => None,
        })
    }

    /// `true` when every group is satisfied up to `tol`.
    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.groups.iter().all(|g| match *g {
            ConeGroup::Bilateral { .. } => true,
            ConeGroup::NonNegative { start, len } => y[start..start + len].iter().all(|&v| v >= -tol),
            ConeGroup::Soc { start, mu } => {
                let t = y[start + 1].hypot(y[start + 2]);
                t <= mu * y[start] + tol
            }
        })
    }
}

/// Euclidean projection onto `{(n, t) : ‖t‖ ≤ μ n}`.
pub fn project_soc(mu: f64, w: [f64; 3]) -> [f64; 3] {
    let [n, t1, t2] = w;
    let t = t1.hypot(t2);
    if n >= 0.0 && t <= mu * n {
        return w;
    }
    if mu * t <= -n {
        return [0.0; 3];
    }
    let scale = (mu * t + n) / (mu * mu + 1.0);
    // t > 0 here: t = 0 falls into one of the two cases above
    [scale, scale * mu * t1 / t, scale * mu * t2 / t]
}

/// Project `w` onto the cone product, writing into `out`.
pub fn project_cone_into(w: &[f64], cones: &ConeProduct, out: &mut [f64]) {
    for g in cones.groups() {
        match *g {
            ConeGroup::Bilateral { start, len } => out[start..start + len].copy_from_slice(&w[start..start + len]),
            ConeGroup::NonNegative { start, len } => {
                for i in start..start + len {
                    out[i] = w[i].max(0.0);
                }
            }
            ConeGroup::Soc { start, mu } => {
                let p = project_soc(mu, [w[start], w[start + 1], w[start + 2]]);
                out[start..start + 3].copy_from_slice(&p);
            }
        }
    }
}

pub fn project_cone(w: &[f64], cones: &ConeProduct) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    project_cone_into(w, cones, &mut out);
    out
}

/// De Saxcé shift: `(μ‖v_t‖, 0, 0)` on every contact group, zero elsewhere.
pub fn desaxce_shift_into(v: &[f64], cones: &ConeProduct, s: &mut [f64]) {
    s.iter_mut().for_each(|x| *x = 0.0);
    for (start, mu) in cones.soc_groups() {
        s[start] = mu * v[start + 1].hypot(v[start + 2]);
    }
}

pub fn desaxce_shift(v: &[f64], cones: &ConeProduct) -> Vec<f64> {
    let mut s = vec![0.0; v.len()];
    desaxce_shift_into(v, cones, &mut s);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_soc(mu: f64) -> ConeProduct {
        let mut c = ConeProduct::new();
        c.push_soc(mu);
        c
    }

    #[test]
    fn bilateral_is_identity() {
        let mut c = ConeProduct::new();
        c.push_bilateral(3);
        let w = [1.5, -2.0, 0.3];
        assert_eq!(project_cone(&w, &c), w.to_vec());
    }

    #[test]
    fn nonnegative_clamps() {
        let mut c = ConeProduct::new();
        c.push_nonnegative(3);
        assert_eq!(project_cone(&[1.0, -2.0, 0.0], &c), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn soc_cases() {
        let c = single_soc(1.0);
        assert_eq!(project_cone(&[1.0, 0.5, 0.0], &c), vec![1.0, 0.5, 0.0]);
        assert_eq!(project_cone(&[-2.0, 1.0, 0.0], &c), vec![0.0, 0.0, 0.0]);
        // boundary case: (0, 1, 0) projects to (0.5, 0.5, 0)
        let p = project_cone(&[0.0, 1.0, 0.0], &c);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15 && p[2] == 0.0);
    }

    #[test]
    fn frictionless_cone() {
        assert_eq!(project_soc(0.0, [2.0, 1.0, -1.0]), [2.0, 0.0, 0.0]);
        assert_eq!(project_soc(0.0, [-2.0, 1.0, -1.0]), [0.0, 0.0, 0.0]);
        assert_eq!(project_soc(0.0, [-1.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn desaxce_values() {
        let mut c = ConeProduct::new();
        c.push_bilateral(2);
        assert_eq!(desaxce_shift(&[1.0, 2.0], &c), vec![0.0, 0.0]);
        let c = single_soc(0.5);
        assert_eq!(desaxce_shift(&[0.7, 0.0, 0.0], &c), vec![0.0, 0.0, 0.0]);
        assert_eq!(desaxce_shift(&[0.7, 3.0, 4.0], &c), vec![2.5, 0.0, 0.0]);
    }

    #[test]
    fn groups_merge_and_layout() {
        let mut c = ConeProduct::new();
        c.push_bilateral(5);
        c.push_bilateral(2);
        c.push_nonnegative(1);
        c.push_soc(0.3);
        c.push_soc(0.4);
        assert_eq!(c.dim(), 14);
        assert_eq!(c.groups().len(), 4);
        assert_eq!(c.groups()[0], ConeGroup::Bilateral { start: 0, len: 7 });
        assert_eq!(c.soc_groups().collect::<Vec<_>>(), vec![(8, 0.3), (11, 0.4)]);
    }

    proptest! {
        #[test]
        fn projection_lands_in_cone_and_is_idempotent(mu in 0.0..3.0f64, n in -5.0..5.0f64, a in -5.0..5.0f64, b in -5.0..5.0f64) {
            let p = project_soc(mu, [n, a, b]);
            prop_assert!(p[1].hypot(p[2]) <= mu * p[0] + 1e-12);
            let pp = project_soc(mu, p);
            for k in 0..3 {
                prop_assert!((pp[k] - p[k]).abs() < 1e-12);
            }
        }
    }
}
