use std::io::{self, Write};

use tctn_core::Tensor;

/// Binary PGM (P5, maxval 255) of an `[H, W, C]` frame. Channels are
/// averaged and values clamped to `[0, 1]` before quantization.
pub fn write_pgm<W: Write>(frame: &Tensor<f32>, mut w: W) -> io::Result<()> {
    let s = frame.shape();
    let (h, wd, c) = (s[0], s[1], s[2]);
    write!(w, "P5\n{wd} {h}\n255\n")?;
    let bytes: Vec<u8> = frame
        .data()
        .chunks(c)
        .map(|px| {
            let v = px.iter().sum::<f32>() / c as f32;
            (v.clamp(0.0, 1.0) * 255.0).round() as u8
        })
        .collect();
    w.write_all(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_quantization() {
        let frame = Tensor::from_vec(vec![0.0, 1.0, 0.5, 2.0, -1.0, 0.25], vec![2, 3, 1]).unwrap();
        let mut out = Vec::new();
        write_pgm(&frame, &mut out).unwrap();
        assert_eq!(&out[..11], b"P5\n3 2\n255\n");
        assert_eq!(&out[11..], &[0, 255, 128, 255, 0, 64]);
    }
}
