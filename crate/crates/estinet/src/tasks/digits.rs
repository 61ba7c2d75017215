//! Deterministic synthetic digit corpus in the same 28x28 format as MNIST.
//! Each image is a 5x7 glyph randomly scaled, placed, brightened, and
//! noised. The experiments fall back to this corpus when no real MNIST
//! files are on disk; it exercises the identical pipeline (IDX files, CNN
//! extractor, sequence tasks) with a classification problem that is
//! learnable but not trivial.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mnist::{MnistData, IMAGE_PIXELS, IMAGE_SIDE};

const GLYPHS: [[&str; 7]; 10] = [
    ["01110", "10001", "10011", "10101", "11001", "10001", "01110"],
    ["00100", "01100", "00100", "00100", "00100", "00100", "01110"],
    ["01110", "10001", "00001", "00010", "00100", "01000", "11111"],
    ["11111", "00010", "00100", "00010", "00001", "10001", "01110"],
    ["00010", "00110", "01010", "10010", "11111", "00010", "00010"],
    ["11111", "10000", "11110", "00001", "00001", "10001", "01110"],
    ["00110", "01000", "10000", "11110", "10001", "10001", "01110"],
    ["11111", "00001", "00010", "00100", "01000", "01000", "01000"],
    ["01110", "10001", "10001", "01110", "10001", "10001", "01110"],
    ["01110", "10001", "10001", "01111", "00001", "00010", "01100"],
];

/// Render one digit with randomized scale, position, intensity, and noise.
fn render(digit: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let glyph = &GLYPHS[digit];
    let sx: f32 = rng.random_range(2.4..3.4);
    let sy: f32 = rng.random_range(2.4..3.1);
    let gw = (5.0 * sx).round() as usize;
    let gh = (7.0 * sy).round() as usize;
    let x0 = rng.random_range(0..=(IMAGE_SIDE - gw.min(IMAGE_SIDE)));
    let y0 = rng.random_range(0..=(IMAGE_SIDE - gh.min(IMAGE_SIDE)));
    let intensity: f32 = rng.random_range(0.7..1.0);
    let noise_sigma: f32 = 0.06;

    let mut img = vec![0.0f32; IMAGE_PIXELS];
    for y in 0..gh.min(IMAGE_SIDE - y0) {
        let src_y = ((y as f32 / sy) as usize).min(6);
        let row = glyph[src_y].as_bytes();
        for x in 0..gw.min(IMAGE_SIDE - x0) {
            let src_x = ((x as f32 / sx) as usize).min(4);
            if row[src_x] == b'1' {
                img[(y0 + y) * IMAGE_SIDE + (x0 + x)] = intensity;
            }
        }
    }
    for p in img.iter_mut() {
        // Box-Muller gaussian pixel noise.
        let u1: f32 = rng.random_range(f32::EPSILON..1.0);
        let u2: f32 = rng.random_range(0.0..1.0);
        let n = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f32::consts::PI * u2).cos();
        *p = (*p + n * noise_sigma).clamp(0.0, 1.0);
    }
    img
}

/// Generate `n` labeled digit images. Pure function of `(n, seed)`.
pub fn generate_digit_corpus(n: usize, seed: u64) -> MnistData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(n * IMAGE_PIXELS);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let digit = rng.random_range(0..10usize);
        pixels.extend(render(digit, &mut rng));
        labels.push(digit as u8);
    }
    MnistData { pixels, labels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_sized() {
        let a = generate_digit_corpus(32, 5);
        let b = generate_digit_corpus(32, 5);
        assert_eq!(a.pixels, b.pixels);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.len(), 32);
        assert_eq!(a.pixels.len(), 32 * IMAGE_PIXELS);
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_digit_corpus(8, 5);
        let b = generate_digit_corpus(8, 6);
        assert_ne!(a.pixels, b.pixels);
    }

    #[test]
    fn pixels_stay_in_unit_range() {
        let c = generate_digit_corpus(64, 9);
        assert!(c.pixels.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(c.labels.iter().all(|&l| l <= 9));
    }

    #[test]
    fn all_ten_digits_appear() {
        let c = generate_digit_corpus(200, 1);
        for d in 0u8..10 {
            assert!(c.labels.contains(&d), "digit {d} missing");
        }
    }
}
