//! Spatially same-padded convolutions over `[T, H, W, C]` sequences.
//!
//! The 2D convolution is the temporal-extent-1 case of the causal 3D kernel:
//! a `[kh, kw, Cin, Cout]` kernel has the same memory layout as
//! `[1, kh, kw, Cin, Cout]`.

use super::elementwise::check_tape;
use super::tape::{BackwardOp, Var};
use crate::error::{Result, TctnError};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug)]
struct Geometry {
    t: usize,
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    kt: usize,
    kh: usize,
    kw: usize,
}

impl Geometry {
    fn resolve(input: &[usize], kernel: &[usize], bias: &[usize]) -> Result<Self> {
        let [t, h, w, cin] = *input else {
            return Err(TctnError::shape(format!(
                "convolution input must be [T,H,W,C], got {input:?}"
            )));
        };
        let (kt, kh, kw, kcin, cout) = match *kernel {
            [kt, kh, kw, ci, co] => (kt, kh, kw, ci, co),
            [kh, kw, ci, co] => (1, kh, kw, ci, co),
            _ => {
                return Err(TctnError::shape(format!(
                    "convolution kernel must be rank 4 or 5, got {kernel:?}"
                )))
            }
        };
        if kcin != cin {
            return Err(TctnError::shape(format!(
                "kernel expects {kcin} input channels, input has {cin}"
            )));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(TctnError::config(format!(
                "spatial kernel extents must be odd, got {kh}x{kw}"
            )));
        }
        if bias != [cout] {
            return Err(TctnError::shape(format!(
                "bias shape {bias:?} should be [{cout}]"
            )));
        }
        Ok(Geometry {
            t,
            h,
            w,
            cin,
            cout,
            kt,
            kh,
            kw,
        })
    }

    /// Visits every (output position, kernel tap, source position) triple
    /// whose source lies inside the left-padded, same-padded input.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (ph, pw) = (self.kh / 2, self.kw / 2);
        for t in 0..self.t {
            for y in 0..self.h {
                for x in 0..self.w {
                    let out = (t * self.h + y) * self.w + x;
                    for dt in 0..self.kt {
                        let Some(ts) = (t + dt).checked_sub(self.kt - 1) else {
                            continue;
                        };
                        for dy in 0..self.kh {
                            let ys = y + dy;
                            if ys < ph || ys - ph >= self.h {
                                continue;
                            }
                            let ys = ys - ph;
                            for dx in 0..self.kw {
                                let xs = x + dx;
                                if xs < pw || xs - pw >= self.w {
                                    continue;
                                }
                                let src = (ts * self.h + ys) * self.w + xs - pw;
                                let tap = (dt * self.kh + dy) * self.kw + dx;
                                f(out, tap, src);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn forward<T: Scalar>(g: &Geometry, x: &[T], k: &[T], b: &[T]) -> Vec<T> {
    let (cin, cout) = (g.cin, g.cout);
    let mut out = vec![T::zero(); g.t * g.h * g.w * cout];
    for row in out.chunks_exact_mut(cout) {
        row.copy_from_slice(b);
    }
    g.for_each_tap(|o, tap, s| {
        let orow = &mut out[o * cout..(o + 1) * cout];
        let xin = &x[s * cin..(s + 1) * cin];
        let kbase = tap * cin * cout;
        for (ci, &xv) in xin.iter().enumerate() {
            let krow = &k[kbase + ci * cout..kbase + (ci + 1) * cout];
            for (acc, &kv) in orow.iter_mut().zip(krow) {
                *acc += xv * kv;
            }
        }
    });
    out
}

struct ConvOp {
    geom: Geometry,
}

impl<T: Scalar> BackwardOp<T> for ConvOp {
    fn backward(
        &self,
        grad: &Tensor<T>,
        inputs: &[&Tensor<T>],
        _: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let g = &self.geom;
        let (cin, cout) = (g.cin, g.cout);
        let (x, k) = (inputs[0].data(), inputs[1].data());
        let gout = grad.data();
        let taps = g.kt * g.kh * g.kw;

        let mut gx = needs[0].then(|| vec![T::zero(); x.len()]);
        let mut gk = needs[1].then(|| vec![T::zero(); k.len()]);

        // Kernel as [tap, Cout, Cin].
        let kt_buf = gx.as_ref().map(|_| {
            let mut buf = vec![T::zero(); k.len()];
            for tap in 0..taps {
                for ci in 0..cin {
                    for co in 0..cout {
                        buf[(tap * cout + co) * cin + ci] = k[(tap * cin + ci) * cout + co];
                    }
                }
            }
            buf
        });

        if gx.is_some() || gk.is_some() {
            g.for_each_tap(|o, tap, s| {
                let grow = &gout[o * cout..(o + 1) * cout];
                if let Some(gk) = gk.as_mut() {
                    let xin = &x[s * cin..(s + 1) * cin];
                    let kbase = tap * cin * cout;
                    for (ci, &xv) in xin.iter().enumerate() {
                        let dst = &mut gk[kbase + ci * cout..kbase + (ci + 1) * cout];
                        for (acc, &gv) in dst.iter_mut().zip(grow) {
                            *acc += xv * gv;
                        }
                    }
                }
                if let (Some(gx), Some(kt_buf)) = (gx.as_mut(), kt_buf.as_ref()) {
                    let dst = &mut gx[s * cin..(s + 1) * cin];
                    let kbase = tap * cout * cin;
                    for (co, &gv) in grow.iter().enumerate() {
                        let krow = &kt_buf[kbase + co * cin..kbase + (co + 1) * cin];
                        for (acc, &kv) in dst.iter_mut().zip(krow) {
                            *acc += gv * kv;
                        }
                    }
                }
            });
        }

        let gb = needs[2].then(|| {
            let mut acc = vec![T::zero(); cout];
            for row in gout.chunks_exact(cout) {
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
            Tensor::from_vec(acc, vec![cout]).expect("shape")
        });

        vec![
            gx.map(|d| Tensor::from_vec(d, inputs[0].shape().to_vec()).expect("shape")),
            gk.map(|d| Tensor::from_vec(d, inputs[1].shape().to_vec()).expect("shape")),
            gb,
        ]
    }
}

fn conv<'t, T: Scalar>(
    name: &'static str,
    input: Var<'t, T>,
    kernel: Var<'t, T>,
    bias: Var<'t, T>,
) -> Result<Var<'t, T>> {
    check_tape(&input, &kernel)?;
    check_tape(&input, &bias)?;
    let (xv, kv, bv) = (input.value(), kernel.value(), bias.value());
    let geom = Geometry::resolve(xv.shape(), kv.shape(), bv.shape())?;
    let out = forward(&geom, xv.data(), kv.data(), bv.data());
    let out = Tensor::from_vec(out, vec![geom.t, geom.h, geom.w, geom.cout])?;
    input
        .tape()
        .record(name, &[input, kernel, bias], out, ConvOp { geom })
}

/// Per-frame 2D cross-correlation with zero same-padding.
/// `input: [T,H,W,Cin]`, `kernel: [kh,kw,Cin,Cout]`, `bias: [Cout]`.
pub fn conv2d_same<'t, T: Scalar>(
    input: Var<'t, T>,
    kernel: Var<'t, T>,
    bias: Var<'t, T>,
) -> Result<Var<'t, T>> {
    if kernel.value().rank() != 4 {
        return Err(TctnError::shape("conv2d kernel must be [kh,kw,Cin,Cout]"));
    }
    conv("conv2d_same", input, kernel, bias)
}

/// 3D convolution that is causal in time: `kt - 1` zero frames are prepended,
/// so output frame `t` reads input frames `t-kt+1 ..= t` only. Spatial axes are
/// same-padded. `kernel: [kt,kh,kw,Cin,Cout]`.
pub fn causal_conv3d<'t, T: Scalar>(
    input: Var<'t, T>,
    kernel: Var<'t, T>,
    bias: Var<'t, T>,
) -> Result<Var<'t, T>> {
    if kernel.value().rank() != 5 {
        return Err(TctnError::shape(
            "conv3d kernel must be [kt,kh,kw,Cin,Cout]",
        ));
    }
    conv("causal_conv3d", input, kernel, bias)
}
