use super::{Activation, NnError, Tensor};
use crate::rng::Rng;

/// Output length of one spatial axis.
pub fn conv_output_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    if stride == 0 || input + 2 * padding < kernel {
        return None;
    }
    Some((input + 2 * padding - kernel) / stride + 1)
}

/// Range of output columns whose input column `o * stride + k - pad` lies in `0..len`.
#[inline]
fn valid_range(len: usize, out_len: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    let last = len as isize - 1 + pad as isize - k as isize;
    if last < 0 {
        return (0, 0);
    }
    let hi = (last as usize / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    pub input: Vec<f64>,
    pub in_shape: [usize; 3],
    pub out_shape: [usize; 3],
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

/// 2-D cross-correlation layer. Weights are `[out, in, kh, kw]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
    pub activation: Activation,
}

impl ConvLayer {
    /// Layer with orthogonal weights (as `[out, in*kh*kw]`) and zero bias.
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self, NnError> {
        if in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0 {
            return Err(NnError::InvalidConfig(format!(
                "conv in={in_ch} out={out_ch} kernel={kernel} stride={stride}"
            )));
        }
        let w = super::orthogonal_from_rng(out_ch, in_ch * kernel * kernel, rng);
        Ok(Self {
            weight: Tensor::from_vec(&[out_ch, in_ch, kernel, kernel], w)?,
            bias: Tensor::zeros(&[out_ch]),
            stride,
            padding,
            activation,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn out_shape(&self, in_shape: [usize; 3]) -> Result<[usize; 3], NnError> {
        let (kh, kw) = (self.weight.shape[2], self.weight.shape[3]);
        if in_shape[0] != self.in_channels() {
            return Err(NnError::ShapeMismatch(format!(
                "conv expects {} input channels, got {}",
                self.in_channels(),
                in_shape[0]
            )));
        }
        let oh = conv_output_dim(in_shape[1], kh, self.stride, self.padding);
        let ow = conv_output_dim(in_shape[2], kw, self.stride, self.padding);
        match (oh, ow) {
            (Some(h), Some(w)) => Ok([self.out_channels(), h, w]),
            _ => Err(NnError::ShapeMismatch(format!(
                "input {}x{} smaller than kernel {kh}x{kw}",
                in_shape[1], in_shape[2]
            ))),
        }
    }

    pub fn forward(&self, x: &[f64], in_shape: [usize; 3]) -> Result<ConvCache, NnError> {
        let out_shape = self.out_shape(in_shape)?;
        if x.len() != in_shape.iter().product::<usize>() {
            return Err(NnError::ShapeMismatch(format!(
                "conv input has {} values for shape {in_shape:?}",
                x.len()
            )));
        }
        let [ic_n, ih, iw] = in_shape;
        let [oc_n, oh, ow] = out_shape;
        let (kh, kw) = (self.weight.shape[2], self.weight.shape[3]);
        let (s, p) = (self.stride, self.padding);
        let w = &self.weight.data;
        let mut pre = vec![0.0; oc_n * oh * ow];
        for oc in 0..oc_n {
            let plane = &mut pre[oc * oh * ow..(oc + 1) * oh * ow];
            plane.iter_mut().for_each(|v| *v = self.bias.data[oc]);
            for ic in 0..ic_n {
                let xin = &x[ic * ih * iw..(ic + 1) * ih * iw];
                for ky in 0..kh {
                    let (oy0, oy1) = valid_range(ih, oh, ky, s, p);
                    for kx in 0..kw {
                        let wv = w[((oc * ic_n + ic) * kh + ky) * kw + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let (ox0, ox1) = valid_range(iw, ow, kx, s, p);
                        for oy in oy0..oy1 {
                            let iy = oy * s + ky - p;
                            let row = &xin[iy * iw..(iy + 1) * iw];
                            let orow = &mut plane[oy * ow..(oy + 1) * ow];
                            if s == 1 {
                                let off = ox0 + kx - p;
                                for (o, xv) in orow[ox0..ox1].iter_mut().zip(&row[off..off + (ox1 - ox0)]) {
                                    *o += wv * xv;
                                }
                            } else {
                                for ox in ox0..ox1 {
                                    orow[ox] += wv * row[ox * s + kx - p];
                                }
                            }
                        }
                    }
                }
            }
        }
        let out = pre.iter().map(|&z| self.activation.apply(z)).collect();
        Ok(ConvCache { input: x.to_vec(), in_shape, out_shape, pre, out })
    }

    /// Accumulates parameter gradients and returns the gradient for the input.
    pub fn backward(&mut self, cache: &ConvCache, d_out: &[f64]) -> Result<Vec<f64>, NnError> {
        if d_out.len() != cache.out.len() {
            return Err(NnError::ShapeMismatch(format!(
                "conv upstream gradient has {} values, expected {}",
                d_out.len(),
                cache.out.len()
            )));
        }
        let [ic_n, ih, iw] = cache.in_shape;
        let [oc_n, oh, ow] = cache.out_shape;
        let (kh, kw) = (self.weight.shape[2], self.weight.shape[3]);
        let (s, p) = (self.stride, self.padding);
        let dpre: Vec<f64> = d_out
            .iter()
            .zip(&cache.pre)
            .map(|(g, &z)| g * self.activation.derivative(z))
            .collect();
        let x = &cache.input;
        let mut dx = vec![0.0; x.len()];
        {
            let db = self.bias.grad_mut();
            for oc in 0..oc_n {
                db[oc] += dpre[oc * oh * ow..(oc + 1) * oh * ow].iter().sum::<f64>();
            }
        }
        let w = self.weight.data.clone();
        let dw = self.weight.grad_mut();
        for oc in 0..oc_n {
            let gplane = &dpre[oc * oh * ow..(oc + 1) * oh * ow];
            for ic in 0..ic_n {
                let xin = &x[ic * ih * iw..(ic + 1) * ih * iw];
                let dxin = &mut dx[ic * ih * iw..(ic + 1) * ih * iw];
                for ky in 0..kh {
                    let (oy0, oy1) = valid_range(ih, oh, ky, s, p);
                    for kx in 0..kw {
                        let idx = ((oc * ic_n + ic) * kh + ky) * kw + kx;
                        let wv = w[idx];
                        let (ox0, ox1) = valid_range(iw, ow, kx, s, p);
                        let mut acc = 0.0;
                        for oy in oy0..oy1 {
                            let iy = oy * s + ky - p;
                            let grow = &gplane[oy * ow..(oy + 1) * ow];
                            if s == 1 {
                                let off = ox0 + kx - p;
                                let n = ox1 - ox0;
                                let row = &xin[iy * iw + off..iy * iw + off + n];
                                let drow = &mut dxin[iy * iw + off..iy * iw + off + n];
                                for ((g, xv), d) in grow[ox0..ox1].iter().zip(row).zip(drow) {
                                    acc += g * xv;
                                    *d += wv * g;
                                }
                            } else {
                                for ox in ox0..ox1 {
                                    let ix = iy * iw + ox * s + kx - p;
                                    acc += grow[ox] * xin[ix];
                                    dxin[ix] += wv * grow[ox];
                                }
                            }
                        }
                        dw[idx] += acc;
                    }
                }
            }
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn layer(w: Vec<f64>, shape: [usize; 4], b: Vec<f64>, stride: usize, pad: usize, act: Activation) -> ConvLayer {
        ConvLayer {
            weight: Tensor::from_vec(&shape, w).unwrap(),
            bias: Tensor::from_vec(&[shape[0]], b).unwrap(),
            stride,
            padding: pad,
            activation: act,
        }
    }

    /// Direct-sum cross-correlation with explicit bounds checks.
    fn brute(l: &ConvLayer, x: &[f64], [c, h, w]: [usize; 3]) -> Vec<f64> {
        let [oc_n, _, kh, kw] = [l.weight.shape[0], l.weight.shape[1], l.weight.shape[2], l.weight.shape[3]];
        let oh = (h + 2 * l.padding - kh) / l.stride + 1;
        let ow = (w + 2 * l.padding - kw) / l.stride + 1;
        let mut out = vec![0.0; oc_n * oh * ow];
        for oc in 0..oc_n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut sum = l.bias.data[oc];
                    for ic in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * l.stride + ky) as isize - l.padding as isize;
                                let ix = (ox * l.stride + kx) as isize - l.padding as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    sum += l.weight.data[((oc * c + ic) * kh + ky) * kw + kx]
                                        * x[(ic * h + iy as usize) * w + ix as usize];
                                }
                            }
                        }
                    }
                    out[(oc * oh + oy) * ow + ox] = sum;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let l = layer(vec![1.0], [1, 1, 1, 1], vec![0.0], 1, 0, Activation::LeakyRelu(0.1));
        let x = vec![0.5, 1.5, 2.0, 3.0];
        assert_eq!(l.forward(&x, [1, 2, 2]).unwrap().out, x);
    }

    #[test]
    fn bias_only() {
        let mut rng = seeded(1);
        let mut l = ConvLayer::new(2, 3, 3, 1, 1, Activation::LeakyRelu(0.1), &mut rng).unwrap();
        l.bias.data = vec![0.5; 3];
        let c = l.forward(&[0.0; 2 * 5 * 5], [2, 5, 5]).unwrap();
        assert!(c.out.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn ones_kernel_on_ones() {
        let l = layer(vec![1.0; 4], [1, 1, 2, 2], vec![0.0], 1, 0, Activation::Identity);
        let c = l.forward(&[1.0; 9], [1, 3, 3]).unwrap();
        assert_eq!(c.out_shape, [1, 2, 2]);
        assert_eq!(c.pre, vec![4.0; 4]);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = seeded(5);
        for (stride, pad, h, w) in [(1, 1, 6, 5), (2, 1, 7, 8), (2, 0, 5, 5), (1, 2, 3, 4), (3, 1, 9, 7)] {
            let l = ConvLayer::new(3, 4, 3, stride, pad, Activation::Identity, &mut rng).unwrap();
            let x: Vec<f64> = (0..3 * h * w).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
            let got = l.forward(&x, [3, h, w]).unwrap().pre;
            let want = brute(&l, &x, [3, h, w]);
            assert_eq!(got.len(), want.len());
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn output_dims() {
        assert_eq!(conv_output_dim(16, 3, 1, 1), Some(16));
        assert_eq!(conv_output_dim(16, 3, 2, 1), Some(8));
        assert_eq!(conv_output_dim(8, 3, 2, 1), Some(4));
        assert_eq!(conv_output_dim(1, 3, 1, 0), None);
    }

    #[test]
    fn shape_errors() {
        let mut rng = seeded(2);
        let l = ConvLayer::new(2, 2, 3, 1, 0, Activation::Relu, &mut rng).unwrap();
        assert!(matches!(l.forward(&[0.0; 9], [1, 3, 3]), Err(NnError::ShapeMismatch(_))));
        assert!(matches!(l.forward(&[0.0; 8], [2, 2, 2]), Err(NnError::ShapeMismatch(_))));
        assert!(matches!(l.forward(&[0.0; 17], [2, 3, 3]), Err(NnError::ShapeMismatch(_))));
    }

    #[test]
    fn fresh_weights_are_orthogonal() {
        let mut rng = seeded(3);
        let l = ConvLayer::new(8, 16, 3, 1, 1, Activation::Relu, &mut rng).unwrap();
        assert!(super::super::gram_deviation(&l.weight.data, 16, 72) <= 1e-6);
    }
}
