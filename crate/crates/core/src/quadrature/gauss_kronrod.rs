//! Globally adaptive 10/21-point Gauss–Kronrod integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{QuadratureError, QuadratureOptions, QuadratureResult};

/// Kronrod abscissae on [-1, 1], descending; the last one is the centre.
/// Odd positions (1, 3, 5, 7, 9) are the 10-point Gauss abscissae.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

/// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

pub(crate) const NODES_PER_PANEL: usize = 21;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    /// Set once the panel is too narrow to bisect in floating point.
    frozen: bool,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // Frozen panels sink to the bottom of the heap.
        (!self.frozen)
            .cmp(&!other.frozen)
            .then(self.error.total_cmp(&other.error))
            .then(other.a.total_cmp(&self.a))
    }
}

/// One Gauss–Kronrod panel: (kronrod value, error estimate).
fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel, QuadratureError> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut abs_sum = WGK[10] * fc.abs();
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        if !f1.is_finite() || !f2.is_finite() {
            let at = if f1.is_finite() { centre + dx } else { centre - dx };
            return Err(QuadratureError::NonFinite { at });
        }
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite { at: centre });
    }
    let value = kronrod * half;
    let roundoff = 50.0 * f64::EPSILON * abs_sum * half.abs();
    let error = ((kronrod - gauss) * half).abs().max(roundoff);
    Ok(Panel {
        a,
        b,
        value,
        error,
        frozen: false,
    })
}

/// Integrates `f` over the finite interval split at `breaks` (sorted, at
/// least two points), bisecting the worst panel until the summed error
/// estimate meets the tolerance or the panel budget runs out.
pub(crate) fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    opts: &QuadratureOptions,
) -> Result<QuadratureResult, QuadratureError> {
    debug_assert!(breaks.len() >= 2);
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if !(w[0].is_finite() && w[1].is_finite()) || w[1] < w[0] {
            return Err(QuadratureError::InvalidInterval { a: w[0], b: w[1] });
        }
        if w[1] > w[0] {
            heap.push(panel(f, w[0], w[1])?);
        }
    }
    let mut evaluations = heap.len() * NODES_PER_PANEL;

    loop {
        let (value, error) = totals(&heap);
        let tolerance = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tolerance {
            return Ok(finish(heap, evaluations, tolerance, true));
        }
        let worst = match heap.peek() {
            Some(p) if !p.frozen && heap.len() < opts.max_panels => heap.pop().unwrap(),
            _ => return Ok(finish(heap, evaluations, tolerance, false)),
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(Panel {
                frozen: true,
                ..worst
            });
            continue;
        }
        heap.push(panel(f, worst.a, mid)?);
        heap.push(panel(f, mid, worst.b)?);
        evaluations += 2 * NODES_PER_PANEL;
    }
}

fn totals(heap: &BinaryHeap<Panel>) -> (f64, f64) {
    heap.iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
}

fn finish(
    heap: BinaryHeap<Panel>,
    nodes_used: usize,
    tolerance: f64,
    reliable: bool,
) -> QuadratureResult {
    // Sum in positional order so the result does not depend on heap layout.
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = pairwise_sum(&panels.iter().map(|p| p.value).collect::<Vec<_>>());
    let abs_error_estimate = pairwise_sum(&panels.iter().map(|p| p.error).collect::<Vec<_>>());
    QuadratureResult {
        value,
        abs_error_estimate,
        nodes_used,
        tolerance,
        reliable,
    }
}

pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}
