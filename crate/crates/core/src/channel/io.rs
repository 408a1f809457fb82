//! Plain-text storage for path trajectories.
//!
//! ```text
//! otfs-trajectories 1
//! config m=8 n=4 paths=4 l_max=5 k_max=2 rho=0.9 zeta=1 nmse=0.01
//! seed 42
//! records 2 frames 6
//! record 0 noise 1234567890
//! p 3 -0.4125 0.31 -0.27
//! ...
//! end
//! ```
//!
//! Each record lists `frames × paths` lines `p <delay> <doppler> <re> <im>`,
//! frame-major. Floats use Rust's shortest round-trip formatting, so a write
//! followed by a read reproduces the values bit for bit.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use thiserror::Error;

use super::{ChannelConfig, PathState, PathTrajectory};

const MAGIC: &str = "otfs-trajectories";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TrajectoryIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A stored dataset: the channel configuration, the master seed and the
/// trajectories it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub config: ChannelConfig,
    pub seed: u64,
    pub records: Vec<PathTrajectory>,
}

pub fn write_trajectories<W: Write>(mut w: W, file: &TrajectoryFile) -> std::io::Result<()> {
    let c = &file.config;
    let frames = file.records.first().map_or(0, |r| r.frames.len());
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(
        w,
        "config m={} n={} paths={} l_max={} k_max={:?} rho={:?} zeta={:?} nmse={:?}",
        c.m, c.n, c.paths, c.l_max, c.k_max, c.rho, c.zeta, c.nmse
    )?;
    writeln!(w, "seed {}", file.seed)?;
    writeln!(w, "records {} frames {}", file.records.len(), frames)?;
    for (i, rec) in file.records.iter().enumerate() {
        writeln!(w, "record {i} noise {}", rec.noise_seed)?;
        for frame in &rec.frames {
            for p in frame {
                writeln!(w, "p {} {:?} {:?} {:?}", p.delay, p.doppler, p.gain.re, p.gain.im)?;
            }
        }
    }
    writeln!(w, "end")?;
    w.flush()
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String, TrajectoryIoError> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> TrajectoryIoError {
        TrajectoryIoError::Parse { line: self.line, msg: msg.into() }
    }

    /// Reads a line and checks its leading keyword; returns the remaining tokens.
    fn expect(&mut self, keyword: &str) -> Result<Vec<String>, TrajectoryIoError> {
        let l = self.next()?;
        let mut toks = l.split_whitespace();
        if toks.next() != Some(keyword) {
            return Err(self.err(format!("expected '{keyword}'")));
        }
        Ok(toks.map(str::to_owned).collect())
    }

    fn parse<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T, TrajectoryIoError> {
        s.parse().map_err(|_| self.err(format!("bad {what}: '{s}'")))
    }
}

pub fn read_trajectories<R: BufRead>(r: R) -> Result<TrajectoryFile, TrajectoryIoError> {
    let mut lines = Lines { inner: r.lines(), line: 0 };
    let head = lines.expect(MAGIC)?;
    if head.len() != 1 || head[0] != VERSION.to_string() {
        return Err(lines.err(format!("unsupported version {head:?}")));
    }

    let toks = lines.expect("config")?;
    let mut cfg = ChannelConfig::default();
    let mut seen = Vec::new();
    for t in &toks {
        let (k, v) = t.split_once('=').ok_or_else(|| lines.err(format!("bad config entry '{t}'")))?;
        match k {
            "m" => cfg.m = lines.parse(v, k)?,
            "n" => cfg.n = lines.parse(v, k)?,
            "paths" => cfg.paths = lines.parse(v, k)?,
            "l_max" => cfg.l_max = lines.parse(v, k)?,
            "k_max" => cfg.k_max = lines.parse(v, k)?,
            "rho" => cfg.rho = lines.parse(v, k)?,
            "zeta" => cfg.zeta = lines.parse(v, k)?,
            "nmse" => cfg.nmse = lines.parse(v, k)?,
            _ => return Err(lines.err(format!("unknown config key '{k}'"))),
        }
        seen.push(k.to_owned());
    }
    if seen.len() != 8 {
        return Err(lines.err("config line must set all eight keys exactly once"));
    }
    cfg.validate().map_err(|e| lines.err(e.to_string()))?;

    let toks = lines.expect("seed")?;
    let seed = match &toks[..] {
        [s] => lines.parse(s, "seed")?,
        _ => return Err(lines.err("expected 'seed <u64>'")),
    };

    let toks = lines.expect("records")?;
    let (count, frames): (usize, usize) = match &toks[..] {
        [c, kw, f] if kw == "frames" => (lines.parse(c, "record count")?, lines.parse(f, "frame count")?),
        _ => return Err(lines.err("expected 'records <n> frames <n>'")),
    };

    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let toks = lines.expect("record")?;
        let noise_seed = match &toks[..] {
            [idx, kw, s] if kw == "noise" && *idx == i.to_string() => lines.parse(s, "noise seed")?,
            _ => return Err(lines.err(format!("expected 'record {i} noise <u64>'"))),
        };
        let mut rec = PathTrajectory { frames: Vec::with_capacity(frames), noise_seed };
        for _ in 0..frames {
            let mut frame = Vec::with_capacity(cfg.paths);
            for _ in 0..cfg.paths {
                let toks = lines.expect("p")?;
                let [d, k, re, im] = &toks[..] else {
                    return Err(lines.err("expected 'p <delay> <doppler> <re> <im>'"));
                };
                let p = PathState {
                    delay: lines.parse(d, "delay")?,
                    doppler: lines.parse(k, "doppler")?,
                    gain: Complex64::new(lines.parse(re, "gain")?, lines.parse(im, "gain")?),
                };
                if p.delay > cfg.l_max || p.doppler.abs() > cfg.k_max || !p.gain.is_finite() {
                    return Err(lines.err("path state outside the configured support"));
                }
                frame.push(p);
            }
            rec.frames.push(frame);
        }
        records.push(rec);
    }
    lines.expect("end")?;
    Ok(TrajectoryFile { config: cfg, seed, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn sample() -> TrajectoryFile {
        let config = ChannelConfig::default();
        let mut rng = stream(5, 0);
        let records = (0..3).map(|_| PathTrajectory::generate(&config, 4, &mut rng)).collect();
        TrajectoryFile { config, seed: 5, records }
    }

    #[test]
    fn round_trip_is_exact() {
        let f = sample();
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &f).unwrap();
        let back = read_trajectories(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn truncated_file_reports_line() {
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(7).map(|l| format!("{l}\n")).collect();
        match read_trajectories(cut.as_bytes()) {
            Err(TrajectoryIoError::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_wrong_magic_and_out_of_range_paths() {
        assert!(read_trajectories("otfs-trajectories 9\n".as_bytes()).is_err());
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first_p = text.lines().position(|l| l.starts_with("p ")).unwrap();
        let bad: String = text
            .lines()
            .enumerate()
            .map(|(i, l)| if i == first_p { "p 99 0.0 1.0 0.0\n".to_string() } else { format!("{l}\n") })
            .collect();
        assert!(read_trajectories(bad.as_bytes()).is_err());
    }
}
