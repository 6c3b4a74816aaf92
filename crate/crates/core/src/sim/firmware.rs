//! Event-driven model of the tile firmware loop.
//!
//! Each tile boots at a random phase, broadcasts its state to every present
//! neighbour once per timer period, keeps only the newest message per
//! direction and updates whenever its timer fires, with whatever it has
//! received so far. Time is virtual: integer milliseconds.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{RunReport, SimMode, Snapshot, TileReport};
use crate::error::{Error, Result};
use crate::nca::{classify, CellState, Direction, Lattice, Nca};
use crate::quant::{QuantizedState, Quantizer};
use crate::shape::ShapeGrid;

/// Updates a tile performs before it stops.
pub const FIRMWARE_UPDATE_CAP: u32 = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct SimClockConfig {
    pub update_timeout_ms: u64,
    /// Upper bound of the uniform boot phase and per-period send delay.
    pub send_jitter_ms: u64,
    pub message_loss_rate: f64,
    pub rng_seed: u64,
    /// Updates per tile, at most [`FIRMWARE_UPDATE_CAP`].
    pub max_updates: u32,
}

impl Default for SimClockConfig {
    fn default() -> Self {
        SimClockConfig {
            update_timeout_ms: 2000,
            send_jitter_ms: 100,
            message_loss_rate: 0.0,
            rng_seed: 0,
            max_updates: FIRMWARE_UPDATE_CAP,
        }
    }
}

impl SimClockConfig {
    pub fn with_seed(seed: u64) -> Self {
        SimClockConfig {
            rng_seed: seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.update_timeout_ms == 0 {
            return Err(Error::Validity("update timeout must be positive".into()));
        }
        if self.send_jitter_ms >= self.update_timeout_ms {
            return Err(Error::Validity(format!(
                "jitter {} ms must be below the {} ms timeout",
                self.send_jitter_ms, self.update_timeout_ms
            )));
        }
        if !(0.0..=1.0).contains(&self.message_loss_rate) {
            return Err(Error::Validity(format!(
                "loss rate {} outside [0, 1]",
                self.message_loss_rate
            )));
        }
        if self.max_updates == 0 || self.max_updates > FIRMWARE_UPDATE_CAP {
            return Err(Error::Validity(format!(
                "max_updates must be in 1..={FIRMWARE_UPDATE_CAP}"
            )));
        }
        Ok(())
    }
}

/// How states are encoded on the links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkCodec {
    /// Lossless float passthrough.
    Passthrough,
    /// 8-bit linear quantization.
    Quantized(Quantizer),
}

/// A message as it sits in a mailbox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Packet {
    Exact(CellState),
    Bytes(QuantizedState),
}

impl LinkCodec {
    pub fn encode(&self, state: &CellState) -> Packet {
        match self {
            LinkCodec::Passthrough => Packet::Exact(*state),
            LinkCodec::Quantized(q) => Packet::Bytes(q.quantize(state)),
        }
    }

    pub fn decode(&self, packet: &Packet) -> CellState {
        match (self, packet) {
            (_, Packet::Exact(s)) => *s,
            (LinkCodec::Quantized(q), Packet::Bytes(b)) => q.dequantize(b),
            (LinkCodec::Passthrough, Packet::Bytes(_)) => {
                panic!("byte packet on a passthrough link")
            }
        }
    }
}

/// Simulated tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TileAgent {
    pub pos: (usize, usize),
    pub state: CellState,
    /// Newest message per direction, in [`Direction::ALL`] order.
    pub last_received: [Option<Packet>; 4],
    pub update_count: u32,
    pub next_update_due: u64,
}

impl TileAgent {
    pub fn new(pos: (usize, usize)) -> Self {
        TileAgent {
            pos,
            state: CellState::seed(),
            last_received: [None; 4],
            update_count: 0,
            next_update_due: 0,
        }
    }

    pub fn prediction(&self) -> u8 {
        classify(&self.state)
    }
}

/// One firmware update: decode the mailboxes (empty ones read as zero), apply
/// the update network with the tile's own float state at the centre tap.
pub fn tile_update(agent: &TileAgent, nca: &Nca, codec: &LinkCodec) -> Result<TileAgent> {
    if agent.update_count >= FIRMWARE_UPDATE_CAP {
        return Err(Error::UpdateCap {
            x: agent.pos.0,
            y: agent.pos.1,
            cap: FIRMWARE_UPDATE_CAP,
        });
    }
    let decoded = agent.last_received.map(|p| p.map(|p| codec.decode(&p)));
    let neighbors = [0, 1, 2, 3].map(|d| decoded[d].as_ref());
    let (delta, _) = nca.forward(&agent.state, neighbors);
    Ok(TileAgent {
        state: agent.state.add(&delta),
        update_count: agent.update_count + 1,
        ..agent.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    // Updates at an instant run before sends at the same instant.
    Update,
    Send,
}

type Event = Reverse<(u64, EventKind, usize, u64)>;

/// Runs every tile until it has performed `clock.max_updates` updates.
///
/// Snapshot `u` holds each tile's prediction right after its own `u`-th update.
pub fn firmware_run(
    nca: &Nca,
    shape: &ShapeGrid,
    codec: &LinkCodec,
    clock: &SimClockConfig,
) -> Result<RunReport> {
    firmware_simulate(nca, shape, codec, clock).map(|(report, _)| report)
}

/// [`firmware_run`] that also returns the tiles as they ended.
pub fn firmware_simulate(
    nca: &Nca,
    shape: &ShapeGrid,
    codec: &LinkCodec,
    clock: &SimClockConfig,
) -> Result<(RunReport, Vec<TileAgent>)> {
    clock.validate()?;
    let lattice = Lattice::new(shape);
    let n = lattice.len();
    let cap = clock.max_updates;
    let mut rng = ChaCha8Rng::seed_from_u64(clock.rng_seed);
    let mut tiles: Vec<TileAgent> = lattice.cells().iter().map(|&p| TileAgent::new(p)).collect();

    let mut queue: BinaryHeap<Event> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |queue: &mut BinaryHeap<Event>, time, kind, tile| {
        queue.push(Reverse((time, kind, tile, seq)));
        seq += 1;
    };
    for (i, tile) in tiles.iter_mut().enumerate() {
        let phase = rng.random_range(0..=clock.send_jitter_ms);
        tile.next_update_due = phase + clock.update_timeout_ms;
        push(&mut queue, phase, EventKind::Send, i);
        push(&mut queue, tile.next_update_due, EventKind::Update, i);
    }

    let mut snapshots: Vec<Snapshot> = (1..=cap as usize)
        .map(|update| Snapshot {
            update,
            tiles: vec![TileReport::UNREPORTED; n],
        })
        .collect();

    while let Some(Reverse((time, kind, i, _))) = queue.pop() {
        match kind {
            EventKind::Send => {
                let packet = codec.encode(&tiles[i].state);
                for d in Direction::ALL {
                    let Some(j) = lattice.neighbors(i)[d.index()] else { continue };
                    if rng.random::<f64>() < clock.message_loss_rate {
                        continue;
                    }
                    tiles[j].last_received[d.opposite().index()] = Some(packet);
                }
            }
            EventKind::Update => {
                tiles[i] = tile_update(&tiles[i], nca, codec)?;
                let tile = &mut tiles[i];
                let k = tile.update_count;
                snapshots[k as usize - 1].tiles[i] = TileReport {
                    update_count: k,
                    prediction: Some(tile.prediction()),
                };
                if k < cap {
                    tile.next_update_due = time + clock.update_timeout_ms;
                    let due = tile.next_update_due;
                    let delay = rng.random_range(0..=clock.send_jitter_ms);
                    push(&mut queue, due, EventKind::Update, i);
                    push(&mut queue, time + delay, EventKind::Send, i);
                }
            }
        }
    }
    debug_assert!(tiles.iter().all(|t| t.update_count == cap));

    let report = RunReport {
        shape: shape.clone(),
        mode: SimMode::Firmware,
        snapshots,
    };
    Ok((report, tiles))
}
