//! Seeded trajectory sets.
//!
//! Record `i` of a set is drawn from `stream(seed, stream_index([tag, i]))`,
//! so any record can be regenerated on its own and a set built on several
//! threads is identical to one built on a single thread. Changing only `ζ` or
//! `ρ` keeps every draw aligned.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use otfs_core::channel::{read_trajectories, write_trajectories, ChannelConfig, PathTrajectory, TrajectoryFile};
use otfs_core::rng::{stream, stream_index};
use rayon::prelude::*;

use crate::BenchError;

pub const TRAIN_TAG: u64 = 0x7472_6169_6e;
pub const TEST_TAG: u64 = 0x7465_7374;
pub const VALIDATE_TAG: u64 = 0x7661_6c69_64;

pub fn generate_records(channel: &ChannelConfig, count: usize, frames: usize, seed: u64, tag: u64) -> Vec<PathTrajectory> {
    (0..count)
        .into_par_iter()
        .map(|i| PathTrajectory::generate(channel, frames, &mut stream(seed, stream_index(&[tag, i as u64]))))
        .collect()
}

pub fn generate_file(channel: &ChannelConfig, count: usize, frames: usize, seed: u64, tag: u64) -> TrajectoryFile {
    TrajectoryFile { config: channel.clone(), seed, records: generate_records(channel, count, frames, seed, tag) }
}

pub fn save(path: &Path, file: &TrajectoryFile) -> Result<(), BenchError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?);
    write_trajectories(&mut w, file)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<TrajectoryFile, BenchError> {
    let f = File::open(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    read_trajectories(BufReader::new(f)).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}

/// Checks that a stored set was drawn from `channel` and is long enough.
pub fn check_compatible(file: &TrajectoryFile, channel: &ChannelConfig, frames: usize) -> Result<(), BenchError> {
    if file.config != *channel {
        return Err(BenchError::Config(format!(
            "dataset channel {:?} differs from configured channel {:?}",
            file.config, channel
        )));
    }
    if let Some(r) = file.records.iter().find(|r| r.frames.len() < frames) {
        return Err(BenchError::Config(format!(
            "dataset records have {} frames, need at least {frames}",
            r.frames.len()
        )));
    }
    if file.records.is_empty() {
        return Err(BenchError::Config("dataset is empty".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_do_not_depend_on_thread_count() {
        let ch = ChannelConfig::default();
        let a = generate_records(&ch, 12, 3, 5, TRAIN_TAG);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| generate_records(&ch, 12, 3, 5, TRAIN_TAG));
        assert_eq!(a, b);
        assert_eq!(a[4], generate_records(&ch, 5, 3, 5, TRAIN_TAG)[4]);
        assert_ne!(a[0], generate_records(&ch, 1, 3, 5, TEST_TAG)[0]);
    }

    #[test]
    fn zeta_only_moves_offsets() {
        let ch = ChannelConfig { zeta: 0.0, ..ChannelConfig::default() };
        let wide = ChannelConfig { zeta: 3.0, ..ch.clone() };
        let a = generate_records(&ch, 4, 4, 1, TEST_TAG);
        let b = generate_records(&wide, 4, 4, 1, TEST_TAG);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.frames[0], rb.frames[0]);
            assert_eq!(ra.noise_seed, rb.noise_seed);
            let ga: Vec<_> = ra.frames[3].iter().map(|p| p.gain).collect();
            let gb: Vec<_> = rb.frames[3].iter().map(|p| p.gain).collect();
            assert_eq!(ga, gb);
        }
    }

    #[test]
    fn compatibility_checks() {
        let ch = ChannelConfig::default();
        let f = generate_file(&ch, 2, 3, 1, TRAIN_TAG);
        assert!(check_compatible(&f, &ch, 3).is_ok());
        assert!(check_compatible(&f, &ch, 4).is_err());
        let other = ChannelConfig { rho: 0.5, ..ch };
        assert!(check_compatible(&f, &other, 3).is_err());
    }
}
