//! Per-unit DER behaviour shapes.
//!
//! A shape multiplies installed capacity to give net injection at each step:
//! PV shapes are nonnegative (generation), EV shapes are nonpositive
//! (consumption).

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::DerKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub kind: DerKind,
    pub steps: usize,
    /// One row of `steps` multipliers per behaviour type.
    pub shapes: Vec<Vec<f64>>,
}

impl ProfileSet {
    pub fn new(kind: DerKind, shapes: Vec<Vec<f64>>) -> Result<Self> {
        let steps = shapes.first().map_or(0, Vec::len);
        let set = ProfileSet { kind, steps, shapes };
        set.validate()?;
        Ok(set)
    }

    /// Single-type set with a constant multiplier.
    pub fn constant(kind: DerKind, steps: usize, value: f64) -> Self {
        ProfileSet {
            kind,
            steps,
            shapes: vec![vec![value; steps]],
        }
    }

    pub fn n_types(&self) -> usize {
        self.shapes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(Error::InvalidInput(format!("{:?} profile set has no rows", self.kind)));
        }
        for (ty, row) in self.shapes.iter().enumerate() {
            if row.len() != self.steps {
                return Err(Error::DimensionMismatch(format!(
                    "profile type {ty} has {} steps, expected {}",
                    row.len(),
                    self.steps
                )));
            }
            for (t, &a) in row.iter().enumerate() {
                let ok = a.is_finite()
                    && match self.kind {
                        DerKind::Pv => a >= 0.0,
                        DerKind::Ev => a <= 0.0,
                    };
                if !ok {
                    return Err(Error::InvalidInput(format!(
                        "{:?} profile type {ty} step {t}: value {a} violates sign convention",
                        self.kind
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads `type_id,t0,...,t{T-1}` CSV. With `negate`, every value is sign
    /// flipped before validation (for EV files recorded as positive demand).
    pub fn read_csv<R: Read>(kind: DerKind, reader: R, negate: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("type_id") {
            return Err(Error::InvalidInput(
                "profile CSV must start with a `type_id` column".into(),
            ));
        }
        for (t, h) in headers.iter().skip(1).enumerate() {
            if h != format!("t{t}") {
                return Err(Error::InvalidInput(format!(
                    "profile CSV column {} should be `t{t}`, found `{h}`",
                    t + 1
                )));
            }
        }
        let steps = headers.len() - 1;
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let id: usize = record[0]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad type_id `{}`", &record[0])))?;
            let values = record
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .map(|a| if negate { -a } else { a })
                        .map_err(|_| Error::InvalidInput(format!("bad profile value `{v}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push((id, values));
        }
        rows.sort_by_key(|(id, _)| *id);
        for (expected, (id, _)) in rows.iter().enumerate() {
            if *id != expected {
                return Err(Error::InvalidInput(format!(
                    "profile type ids must be 0..n without gaps, missing {expected}"
                )));
            }
        }
        let set = ProfileSet {
            kind,
            steps,
            shapes: rows.into_iter().map(|(_, v)| v).collect(),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn load_csv(kind: DerKind, path: impl AsRef<Path>, negate: bool) -> Result<Self> {
        Self::read_csv(kind, std::fs::File::open(path)?, negate)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["type_id".to_string()];
        header.extend((0..self.steps).map(|t| format!("t{t}")));
        w.write_record(&header)?;
        for (ty, row) in self.shapes.iter().enumerate() {
            let mut rec = vec![ty.to_string()];
            rec.extend(row.iter().map(|a| a.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// EV and PV shapes used together when evaluating a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileLibrary {
    pub ev: ProfileSet,
    pub pv: ProfileSet,
}

impl ProfileLibrary {
    pub fn new(ev: ProfileSet, pv: ProfileSet) -> Result<Self> {
        if ev.kind != DerKind::Ev || pv.kind != DerKind::Pv {
            return Err(Error::InvalidInput("profile library kinds swapped".into()));
        }
        if ev.steps != pv.steps {
            return Err(Error::DimensionMismatch(format!(
                "EV profiles have {} steps, PV profiles {}",
                ev.steps, pv.steps
            )));
        }
        Ok(ProfileLibrary { ev, pv })
    }

    pub fn get(&self, kind: DerKind) -> &ProfileSet {
        match kind {
            DerKind::Ev => &self.ev,
            DerKind::Pv => &self.pv,
        }
    }

    pub fn steps(&self) -> usize {
        self.ev.steps
    }

    pub fn synthetic(n_ev: usize, n_pv: usize, steps: usize, params: &SynthParams, rng: &mut impl Rng) -> Self {
        ProfileLibrary {
            ev: synth_profiles(DerKind::Ev, n_ev, steps, params, rng),
            pv: synth_profiles(DerKind::Pv, n_pv, steps, params, rng),
        }
    }
}

/// Shape parameters for [`synth_profiles`]. Times are hours of day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    /// Charging window length.
    pub ev_window_h: f64,
    /// Earliest charging start.
    pub ev_start_h: f64,
    /// Width of the interval over which start times are spread.
    pub ev_spread_h: f64,
    pub pv_sunrise_h: f64,
    pub pv_sunset_h: f64,
    /// Type amplitudes are drawn from `[1 - spread, 1]`.
    pub pv_amplitude_spread: f64,
    /// Multiplicative Gaussian noise level on daylight steps.
    pub pv_noise: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            ev_window_h: 2.0,
            ev_start_h: 17.0,
            ev_spread_h: 6.0,
            pv_sunrise_h: 6.0,
            pv_sunset_h: 18.0,
            pv_amplitude_spread: 0.2,
            pv_noise: 0.05,
        }
    }
}

/// Base-2 radical inverse: 0, 1/2, 1/4, 3/4, 1/8, ...
fn radical_inverse(mut k: usize) -> f64 {
    let mut inv = 0.5;
    let mut out = 0.0;
    while k > 0 {
        if k & 1 == 1 {
            out += inv;
        }
        inv *= 0.5;
        k >>= 1;
    }
    out
}

/// Synthetic behaviour shapes over one day split into `steps` intervals.
///
/// EV type `k` charges at full rating (-1.0) for `ev_window_h` starting at
/// `ev_start_h + ev_spread_h * radical_inverse(k)`, wrapping past midnight.
/// The radical-inverse ordering makes any prefix of types spread evenly, so
/// drawing from the first `n` rows of a larger library still staggers starts.
///
/// PV type `k` follows `a_k * sin(pi * (h - sunrise) / (sunset - sunrise))`
/// during daylight with small multiplicative noise, clamped to `[0, 1]`, and
/// is exactly zero outside daylight.
pub fn synth_profiles(
    kind: DerKind,
    n_types: usize,
    steps: usize,
    params: &SynthParams,
    rng: &mut impl Rng,
) -> ProfileSet {
    let n_types = n_types.max(1);
    let steps = steps.max(1);
    let step_h = 24.0 / steps as f64;
    let shapes = match kind {
        DerKind::Ev => {
            let window = (params.ev_window_h / step_h).round() as usize;
            (0..n_types)
                .map(|k| {
                    let start_h = params.ev_start_h + params.ev_spread_h * radical_inverse(k);
                    let start = (start_h / step_h).round() as usize;
                    let mut row = vec![0.0; steps];
                    for s in 0..window.min(steps) {
                        row[(start + s) % steps] = -1.0;
                    }
                    row
                })
                .collect()
        }
        DerKind::Pv => (0..n_types)
            .map(|_| {
                let amplitude = 1.0 - params.pv_amplitude_spread * rng.random::<f64>();
                (0..steps)
                    .map(|t| {
                        let h = t as f64 * step_h;
                        if h <= params.pv_sunrise_h || h >= params.pv_sunset_h {
                            return 0.0;
                        }
                        let phase = (h - params.pv_sunrise_h)
                            / (params.pv_sunset_h - params.pv_sunrise_h);
                        let noise: f64 = StandardNormal.sample(rng);
                        let a = amplitude
                            * (std::f64::consts::PI * phase).sin()
                            * (1.0 + params.pv_noise * noise);
                        a.clamp(0.0, 1.0)
                    })
                    .collect()
            })
            .collect(),
    };
    ProfileSet {
        kind,
        steps,
        shapes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pv_zero_at_night() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = synth_profiles(DerKind::Pv, 20, 144, &SynthParams::default(), &mut rng);
        set.validate().unwrap();
        for row in &set.shapes {
            assert_eq!(row[0], 0.0);
            assert_eq!(row[143], 0.0);
            // 03:00
            assert_eq!(row[18], 0.0);
            assert!(row[72] > 0.5);
        }
    }

    #[test]
    fn ev_single_type_rows_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let set = synth_profiles(DerKind::Ev, 1, 144, &SynthParams::default(), &mut rng);
        assert_eq!(set.n_types(), 1);
        assert!(set.shapes.iter().all(|r| *r == set.shapes[0]));
    }

    #[test]
    fn ev_two_hour_window_has_twelve_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let set = synth_profiles(DerKind::Ev, 20, 144, &SynthParams::default(), &mut rng);
        set.validate().unwrap();
        for row in &set.shapes {
            assert_eq!(row.iter().filter(|a| **a != 0.0).count(), 12);
            assert!(row.iter().all(|a| *a == 0.0 || *a == -1.0));
        }
    }

    #[test]
    fn ev_prefix_starts_are_staggered() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let set = synth_profiles(DerKind::Ev, 5, 144, &SynthParams::default(), &mut rng);
        let starts: Vec<usize> = set
            .shapes
            .iter()
            .map(|r| r.iter().position(|a| *a != 0.0).unwrap())
            .collect();
        let mut sorted = starts.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 5);
    }

    #[test]
    fn csv_round_trip_and_negate() {
        let ev = ProfileSet::new(DerKind::Ev, vec![vec![0.0, -1.0, -0.5], vec![-1.0, 0.0, 0.0]]).unwrap();
        let mut buf = Vec::new();
        ev.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("type_id,t0,t1,t2\n"));
        assert_eq!(ProfileSet::read_csv(DerKind::Ev, &buf[..], false).unwrap(), ev);

        let positive = "type_id,t0,t1\n0,1.0,0.5\n";
        assert!(ProfileSet::read_csv(DerKind::Ev, positive.as_bytes(), false).is_err());
        let negated = ProfileSet::read_csv(DerKind::Ev, positive.as_bytes(), true).unwrap();
        assert_eq!(negated.shapes, vec![vec![-1.0, -0.5]]);
    }

    #[test]
    fn csv_rejects_bad_header() {
        let text = "type,t0\n0,1\n";
        assert!(ProfileSet::read_csv(DerKind::Pv, text.as_bytes(), false).is_err());
    }
}
