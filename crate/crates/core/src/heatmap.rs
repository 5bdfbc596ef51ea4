//! Grayscale PGM rendering of a landscape.
//!
//! Byte layout of the binary (P5) file:
//!
//! ```text
//! P5\n
//! # minimum gamma_index=<i> beta_index=<j> gamma=<γ> beta=<β> energy=<E>\n
//! <width> <height>\n
//! 255\n
//! <width * height bytes, row-major>
//! ```
//!
//! `width = |Γ|` and `height = |B|`. Pixel `(x, y)` is byte `y * width + x`;
//! column `x` is γ index `x`, row `y` is β index `height - 1 - y`, so β grows
//! upward. Intensity is `round(255 (E - min) / (max - min))`. The minimum from
//! [`find_minimum`] is the only pixel with value 0; other points that would
//! round to 0 are raised to 1. A constant landscape renders as all 128.

use std::fmt::Write as _;

use crate::landscape::{find_minimum, Landscape, Minimum};

pub const MIDGRAY: u8 = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub pixels: Vec<u8>,
    pub minimum: Minimum,
}

impl Heatmap {
    pub fn render(l: &Landscape) -> Self {
        let minimum = find_minimum(l);
        let width = l.grid().gamma_values().len();
        let height = l.grid().beta_values().len();
        let lo = minimum.energy;
        let hi = l.energies().iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut pixels = vec![MIDGRAY; width * height];
        if hi > lo {
            for y in 0..height {
                let bi = height - 1 - y;
                for gi in 0..width {
                    let v = (255.0 * (l.energy(gi, bi) - lo) / (hi - lo)).round() as u8;
                    let is_min = (gi, bi) == (minimum.gamma_index, minimum.beta_index);
                    pixels[y * width + gi] = if is_min { 0 } else { v.max(1) };
                }
            }
        }
        Heatmap {
            width,
            height,
            pixels,
            minimum,
        }
    }

    /// Value at grid indices.
    pub fn at(&self, gamma_index: usize, beta_index: usize) -> u8 {
        self.pixels[(self.height - 1 - beta_index) * self.width + gamma_index]
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let m = &self.minimum;
        let mut header = String::from("P5\n");
        writeln!(
            header,
            "# minimum gamma_index={} beta_index={} gamma={} beta={} energy={}",
            m.gamma_index, m.beta_index, m.gamma, m.beta, m.energy
        )
        .expect("write to string");
        writeln!(header, "{} {}\n255", self.width, self.height).expect("write to string");
        let mut out = header.into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::AccessLayer;
    use crate::landscape::{sample_landscape, GridSpec, LandscapeMeta, LandscapeRequest, SamplingOptions, ShotMode};
    use crate::problem::WeightedGraph;

    fn fixture(energies: Vec<Vec<f64>>) -> Landscape {
        let meta = LandscapeMeta {
            backend: "fixture".into(),
            shots: ShotMode::Exact,
            depth: 1,
            fixed_layer1: None,
            seed: 0,
            created_at: 0,
            graph: WeightedGraph::paper_instance(),
        };
        Landscape::new(GridSpec::default(), energies, meta).unwrap()
    }

    /// Minimal independent P5 reader: returns (width, height, maxval, pixels).
    fn parse(bytes: &[u8]) -> (usize, usize, usize, Vec<u8>) {
        let mut fields = Vec::new();
        let mut i = 0;
        while fields.len() < 4 {
            if bytes[i] == b'#' {
                while bytes[i] != b'\n' {
                    i += 1;
                }
            } else if bytes[i].is_ascii_whitespace() {
                i += 1;
            } else {
                let start = i;
                while !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                fields.push(String::from_utf8(bytes[start..i].to_vec()).unwrap());
            }
        }
        assert_eq!(fields[0], "P5");
        (
            fields[1].parse().unwrap(),
            fields[2].parse().unwrap(),
            fields[3].parse().unwrap(),
            bytes[i + 1..].to_vec(),
        )
    }

    #[test]
    fn format_contract() {
        let mut rows = vec![vec![-1.0; 11]; 21];
        rows[20][10] = 0.0;
        rows[2][3] = -3.0;
        let h = Heatmap::render(&fixture(rows));
        let (w, ht, maxval, px) = parse(&h.to_pgm());
        assert_eq!((w, ht, maxval, px.len()), (21, 11, 255, 231));
        // top-right pixel is γ index 20, β index 10
        assert_eq!(px[20], 255);
        assert_eq!(px[(10 - 3) * 21 + 2], 0);
        assert_eq!(h.at(2, 3), 0);
        assert_eq!(h.at(0, 0), 170);
        let text = String::from_utf8_lossy(&h.to_pgm()[..80]).to_string();
        assert!(text.contains("# minimum gamma_index=2 beta_index=3"));
    }

    #[test]
    fn constant_is_midgray() {
        let h = Heatmap::render(&fixture(vec![vec![-4.5; 11]; 21]));
        let (_, _, _, px) = parse(&h.to_pgm());
        assert!(px.iter().all(|&p| p == 128));
    }

    #[test]
    fn ties_keep_a_single_darkest_pixel() {
        let mut rows = vec![vec![0.0; 11]; 21];
        rows[4][1] = -2.0;
        rows[7][9] = -2.0;
        let h = Heatmap::render(&fixture(rows));
        assert_eq!(h.pixels.iter().filter(|&&p| p == 0).count(), 1);
        assert_eq!((h.at(4, 1), h.at(7, 9)), (0, 1));
    }

    #[test]
    fn darkest_pixel_is_the_minimum() {
        let l = sample_landscape(
            &AccessLayer::with_registry(),
            "local-exact",
            &WeightedGraph::paper_instance(),
            &LandscapeRequest::depth1(GridSpec::default(), ShotMode::Exact, 0),
            &SamplingOptions::default(),
        )
        .unwrap();
        let (w, ht, _, px) = parse(&Heatmap::render(&l).to_pgm());
        let darkest = (0..px.len()).min_by_key(|&i| px[i]).unwrap();
        let (gi, bi) = (darkest % w, ht - 1 - darkest / w);
        let m = find_minimum(&l);
        assert_eq!((gi, bi), (m.gamma_index, m.beta_index));
    }

    proptest::proptest! {
        #[test]
        fn darkest_pixel_matches_minimum(values in proptest::collection::vec(-8.0f64..0.0, 231)) {
            let l = fixture(values.chunks(11).map(<[f64]>::to_vec).collect());
            let h = Heatmap::render(&l);
            let m = find_minimum(&l);
            let darkest = (0..h.pixels.len()).min_by_key(|&i| h.pixels[i]).unwrap();
            proptest::prop_assert_eq!((darkest % 21, 10 - darkest / 21), (m.gamma_index, m.beta_index));
            proptest::prop_assert_eq!(h.pixels.iter().filter(|&&p| p == 0).count(), 1);
        }
    }
}
