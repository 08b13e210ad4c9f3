//! 2×2 stride-2 max pooling that records where each maximum came from, and
//! the unpooling that puts values back there.

use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// Argmax location of every pooling window, as absolute (row, col) in the
/// pooled input plane. Ordered like the pooled output: channel, row, col.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolSwitches {
    channels: usize,
    in_h: usize,
    in_w: usize,
    coords: Vec<(usize, usize)>,
}

impl PoolSwitches {
    /// Validates every coordinate against its own window.
    pub fn new(
        channels: usize,
        in_h: usize,
        in_w: usize,
        coords: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if !in_h.is_multiple_of(2) || !in_w.is_multiple_of(2) || in_h == 0 || in_w == 0 {
            return Err(shape_err!("switch plane {in_h}x{in_w} must be even and non-empty"));
        }
        let (oh, ow) = (in_h / 2, in_w / 2);
        if coords.len() != channels * oh * ow {
            return Err(shape_err!(
                "{} switches for {channels}x{oh}x{ow} windows",
                coords.len()
            ));
        }
        for (n, &(r, c)) in coords.iter().enumerate() {
            let (oy, ox) = ((n / ow) % oh, n % ow);
            if r / 2 != oy || c / 2 != ox {
                return Err(shape_err!("switch ({r},{c}) lies outside window ({oy},{ox})"));
            }
        }
        Ok(PoolSwitches {
            channels,
            in_h,
            in_w,
            coords,
        })
    }

    pub fn coords(&self) -> &[(usize, usize)] {
        &self.coords
    }

    /// Shape of the tensor that was pooled.
    pub fn input_dims(&self) -> [usize; 3] {
        [self.channels, self.in_h, self.in_w]
    }

    pub fn output_dims(&self) -> [usize; 3] {
        [self.channels, self.in_h / 2, self.in_w / 2]
    }

    fn flat_source(&self, n: usize) -> usize {
        let plane_out = (self.in_h / 2) * (self.in_w / 2);
        let ch = n / plane_out;
        let (r, c) = self.coords[n];
        (ch * self.in_h + r) * self.in_w + c
    }
}

/// Per-window maximum; ties go to the first element in row-major order.
pub fn maxpool2x2_forward(input: &Tensor) -> Result<(Tensor, PoolSwitches)> {
    let (c, h, w) = input.chw()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(shape_err!("max-pool needs even spatial size, got {h}x{w}"));
    }
    let (oh, ow) = (h / 2, w / 2);
    let d = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut coords = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = &d[ch * h * w..(ch + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (2 * oy, 2 * ox);
                let mut best_v = plane[best.0 * w + best.1];
                for (r, col) in [(2 * oy, 2 * ox + 1), (2 * oy + 1, 2 * ox), (2 * oy + 1, 2 * ox + 1)] {
                    let v = plane[r * w + col];
                    if v > best_v {
                        best_v = v;
                        best = (r, col);
                    }
                }
                out.push(best_v);
                coords.push(best);
            }
        }
    }
    let switches = PoolSwitches {
        channels: c,
        in_h: h,
        in_w: w,
        coords,
    };
    Ok((Tensor::from_vec(&[c, oh, ow], out)?, switches))
}

/// Scatters each value to its recorded location; everything else is zero.
pub fn unpool2x2_forward(input: &Tensor, switches: &PoolSwitches) -> Result<Tensor> {
    input.ensure_shape(&switches.output_dims())?;
    let mut out = Tensor::zeros(&switches.input_dims())?;
    let od = out.data_mut();
    for (n, &v) in input.data().iter().enumerate() {
        od[switches.flat_source(n)] = v;
    }
    Ok(out)
}

/// Gathers the values sitting at the switch locations.
pub fn unpool2x2_backward(grad_out: &Tensor, switches: &PoolSwitches) -> Result<Tensor> {
    grad_out.ensure_shape(&switches.input_dims())?;
    let g = grad_out.data();
    let data = (0..switches.coords.len()).map(|n| g[switches.flat_source(n)]).collect();
    Tensor::from_vec(&switches.output_dims(), data)
}

/// Routes each upstream gradient to its window's argmax.
pub fn maxpool2x2_backward(grad_out: &Tensor, switches: &PoolSwitches) -> Result<Tensor> {
    unpool2x2_forward(grad_out, switches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Rng;

    fn t(dims: &[usize], v: &[f64]) -> Tensor {
        Tensor::from_vec(dims, v.to_vec()).unwrap()
    }

    #[test]
    fn single_window() {
        let (p, s) = maxpool2x2_forward(&t(&[1, 2, 2], &[1.0, 3.0, 2.0, 0.0])).unwrap();
        assert_eq!(p.data(), &[3.0]);
        assert_eq!(s.coords(), &[(0, 1)]);
    }

    #[test]
    fn ties_take_first_in_row_major() {
        let (p, s) = maxpool2x2_forward(&t(&[1, 2, 2], &[5.0, 5.0, 0.0, 0.0])).unwrap();
        assert_eq!(p.data(), &[5.0]);
        assert_eq!(s.coords(), &[(0, 0)]);
        let (_, s) = maxpool2x2_forward(&t(&[1, 2, 2], &[0.0, 1.0, 1.0, 1.0])).unwrap();
        assert_eq!(s.coords(), &[(0, 1)]);
    }

    #[test]
    fn odd_sizes_rejected() {
        assert!(maxpool2x2_forward(&Tensor::zeros(&[1, 3, 2]).unwrap()).is_err());
        assert!(maxpool2x2_forward(&Tensor::zeros(&[2, 4, 5]).unwrap()).is_err());
    }

    #[test]
    fn brute_force_windows() {
        let mut rng = Rng::new(11);
        let x = t(&[1, 4, 4], &(0..16).map(|_| rng.uniform(-1.0, 1.0)).collect::<Vec<_>>());
        let (p, s) = maxpool2x2_forward(&x).unwrap();
        for oy in 0..2 {
            for ox in 0..2 {
                let cells = [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(a, b)| (2 * oy + a, 2 * ox + b));
                let (mut br, mut bv) = (cells[0], x.data()[cells[0].0 * 4 + cells[0].1]);
                for &(r, c) in &cells[1..] {
                    if x.data()[r * 4 + c] > bv {
                        bv = x.data()[r * 4 + c];
                        br = (r, c);
                    }
                }
                assert_eq!(p.data()[oy * 2 + ox], bv);
                assert_eq!(s.coords()[oy * 2 + ox], br);
            }
        }
    }

    #[test]
    fn unpool_places_value() {
        let s = PoolSwitches::new(1, 2, 2, vec![(0, 1)]).unwrap();
        let u = unpool2x2_forward(&t(&[1, 1, 1], &[3.0]), &s).unwrap();
        assert_eq!(u.data(), &[0.0, 3.0, 0.0, 0.0]);
        let s = PoolSwitches::new(2, 4, 2, vec![(1, 1), (2, 0), (0, 0), (3, 1)]).unwrap();
        let u = unpool2x2_forward(&Tensor::zeros(&[2, 2, 1]).unwrap(), &s).unwrap();
        assert!(u.data().iter().all(|&v| v == 0.0));
        assert!(unpool2x2_forward(&Tensor::zeros(&[2, 1, 1]).unwrap(), &s).is_err());
    }

    #[test]
    fn switches_validate_windows() {
        assert!(PoolSwitches::new(1, 2, 2, vec![(2, 0)]).is_err());
        assert!(PoolSwitches::new(1, 4, 4, vec![(0, 0), (0, 1), (2, 2), (3, 3)]).is_err());
        assert!(PoolSwitches::new(1, 3, 2, vec![(0, 0)]).is_err());
        assert!(PoolSwitches::new(1, 2, 2, vec![]).is_err());
    }

    #[test]
    fn unpool_backward_gathers() {
        let s = PoolSwitches::new(1, 2, 4, vec![(1, 0), (0, 3)]).unwrap();
        let g = t(&[1, 2, 4], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(unpool2x2_backward(&g, &s).unwrap().data(), &[5.0, 4.0]);
    }
}
