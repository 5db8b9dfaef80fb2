//! Adam over the parameter groups of a [`GaussianCloud`].

use crate::model::{GaussianCloud, Group, Params};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct Adam {
    m: Params,
    v: Params,
    step: u64,
}

impl Adam {
    pub fn new(cloud: &GaussianCloud) -> Self {
        let n = cloud.len();
        Adam {
            m: Params::zeros(n, cloud.sh_degree()),
            v: Params::zeros(n, cloud.sh_degree()),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. `lr` gives the learning rate per group.
    ///
    /// A group whose gradient contains a non-finite value is left untouched for
    /// this step. Returns the groups that were skipped.
    pub fn step(&mut self, cloud: &mut GaussianCloud, grads: &Params, lr: impl Fn(Group) -> f64) -> Vec<Group> {
        debug_assert_eq!(grads.len(), cloud.len());
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step as i32);
        let bc2 = 1.0 - BETA2.powi(self.step as i32);
        let mut skipped = Vec::new();
        for g in Group::ALL {
            let grad = grads.group(g);
            if grad.iter().any(|v| !v.is_finite()) {
                skipped.push(g);
                continue;
            }
            let rate = lr(g);
            let m = self.m.group_mut(g);
            let v = self.v.group_mut(g);
            let p = cloud.params.group_mut(g);
            for k in 0..grad.len() {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * grad[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * grad[k] * grad[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
        cloud.normalize_rotations();
        skipped
    }

    /// Keeps the moments of the surviving Gaussians.
    pub fn retain(&mut self, keep: &[bool]) {
        self.m.retain(keep);
        self.v.retain(keep);
    }

    /// Appends moments for a new Gaussian, copied from `source` or zeroed.
    pub fn push(&mut self, source: Option<usize>) {
        match source {
            Some(i) => {
                self.m.push_copy(i);
                self.v.push_copy(i);
            }
            None => {
                self.m.push_zeros();
                self.v.push_zeros();
            }
        }
    }

    /// Zeroes all moments of Gaussian `i`.
    pub fn zero_slot(&mut self, i: usize) {
        let degree = self.m.sh_degree;
        for g in Group::ALL {
            let stride = g.stride(degree);
            self.m.group_mut(g)[i * stride..(i + 1) * stride].fill(0.0);
            self.v.group_mut(g)[i * stride..(i + 1) * stride].fill(0.0);
        }
    }

    /// Zeroes the moments of one group (after an opacity reset).
    pub fn reset_group(&mut self, g: Group) {
        self.m.group_mut(g).iter_mut().for_each(|x| *x = 0.0);
        self.v.group_mut(g).iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}
