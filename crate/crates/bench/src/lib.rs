//! Inputs shared by the benchmarks.

use image::{Rgb, RgbImage};

/// A white frame and a copy with every `stride`-th pixel set to black.
pub fn flipped_pair(width: u32, height: u32, stride: usize) -> (RgbImage, RgbImage) {
    let a = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let mut b = a.clone();
    for (i, p) in b.pixels_mut().enumerate() {
        if i % stride == 0 {
            *p = Rgb([0, 0, 0]);
        }
    }
    (a, b)
}

/// Every benchmark topic plan, concatenated in manifest order.
pub fn benchmark_specs() -> Vec<String> {
    let dir = demoforge::testkit::assets_dir().join("benchmark/specs");
    let mut paths: Vec<_> = std::fs::read_dir(dir).expect("specs dir").map(|e| e.expect("entry").path()).collect();
    paths.sort();
    paths.into_iter().map(|p| std::fs::read_to_string(p).expect("spec readable")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flipped_pair_differs_at_the_stride() {
        let (a, b) = flipped_pair(10, 10, 20);
        assert_eq!(demoforge::diff::pixel_diff(&a, &b).unwrap(), 0.05);
        assert_eq!(benchmark_specs().len(), 19);
    }
}
