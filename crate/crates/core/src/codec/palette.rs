//! Median-cut palette construction.

use std::collections::HashMap;

use crate::image::RasterImage;
use crate::mesh::Rgb;

use super::CodecError;

type Bucket = Vec<(Rgb, u64)>;

fn channel_range(bucket: &Bucket) -> (u8, usize) {
    (0..3)
        .map(|ch| {
            let lo = bucket.iter().map(|(c, _)| c[ch]).min().unwrap();
            let hi = bucket.iter().map(|(c, _)| c[ch]).max().unwrap();
            (hi - lo, ch)
        })
        // Widest channel; lowest channel index on ties.
        .min_by_key(|&(range, ch)| (std::cmp::Reverse(range), ch))
        .unwrap()
}

fn split(mut bucket: Bucket, ch: usize) -> (Bucket, Bucket) {
    bucket.sort_unstable_by_key(|&(c, _)| (c[ch], c));
    let total: u64 = bucket.iter().map(|&(_, n)| n).sum();
    let mut best = None;
    let mut before = 0u64;
    for p in 1..bucket.len() {
        before += bucket[p - 1].1;
        if bucket[p - 1].0[ch] == bucket[p].0[ch] {
            continue;
        }
        let score = (2 * before).abs_diff(total);
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, p));
        }
    }
    let (_, at) = best.expect("bucket with a nonzero range has a split point");
    let upper = bucket.split_off(at);
    (bucket, upper)
}

fn mean(bucket: &Bucket) -> Rgb {
    let total: u64 = bucket.iter().map(|&(_, n)| n).sum();
    let mut out = [0u8; 3];
    for (ch, o) in out.iter_mut().enumerate() {
        let sum: u64 = bucket.iter().map(|&(c, n)| c[ch] as u64 * n).sum();
        *o = ((2 * sum + total) / (2 * total)) as u8;
    }
    out
}

/// `k` palette entries by median cut over the image's pixels, sorted
/// lexicographically. Images with fewer than `k` distinct colors get their
/// entries repeated to fill the palette.
pub fn init_palette(image: &RasterImage, k: usize) -> Result<Vec<Rgb>, CodecError> {
    if k == 0 {
        return Err(CodecError::Config("palette size must be at least 1".into()));
    }
    let mut counts: HashMap<Rgb, u64> = HashMap::new();
    for p in image.pixels() {
        *counts.entry(p).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(CodecError::Config("cannot build a palette from an empty image".into()));
    }
    let mut all: Bucket = counts.into_iter().collect();
    all.sort_unstable();

    let mut buckets = vec![all];
    while buckets.len() < k {
        let pick = buckets
            .iter()
            .enumerate()
            .filter(|(_, b)| b.len() > 1)
            .map(|(i, b)| (channel_range(b), i))
            .max_by_key(|&((range, _), i)| (range, std::cmp::Reverse(i)));
        let Some(((_, ch), i)) = pick else { break };
        let (lo, hi) = split(buckets.swap_remove(i), ch);
        buckets.push(lo);
        buckets.push(hi);
    }
    let base: Vec<Rgb> = buckets.iter().map(mean).collect();
    let mut palette: Vec<Rgb> = base.iter().copied().cycle().take(k).collect();
    palette.sort_unstable();
    Ok(palette)
}

/// Index of the palette entry closest to `color` in RGB (lowest index on ties).
pub fn nearest_index(palette: &[Rgb], color: Rgb) -> u8 {
    let dist = |p: &Rgb| -> u32 {
        (0..3)
            .map(|ch| {
                let d = p[ch] as i32 - color[ch] as i32;
                (d * d) as u32
            })
            .sum()
    };
    palette
        .iter()
        .enumerate()
        .min_by_key(|&(i, p)| (dist(p), i))
        .map(|(i, _)| i as u8)
        .unwrap()
}
