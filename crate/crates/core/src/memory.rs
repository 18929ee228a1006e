//! Per-node history stores.
//!
//! [`LazyState`] holds the last diffused features (`M_fea`) and the last
//! input-feature gradients (`M_grad`) for every node. Its size is fixed at
//! `2 * N * C` values no matter how many propagation layers run per step.
//!
//! Checkpoint layout (little-endian): `b"LZST"`, `u32` version, `u64` N,
//! `u64` C, then the `M_fea` rows and the `M_grad` rows as `f64`. A row that was
//! never written is stored as NaN so a reload restores its cold-start flag.

use std::io::{Read, Write};

use crate::{Error, Matrix, Real, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LZST";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Store {
    Features,
    Gradients,
}

/// The result of a gather: rows in request order and whether each was ever written.
#[derive(Debug, Clone, PartialEq)]
pub struct Gathered<T = f64> {
    pub rows: Matrix<T>,
    pub initialized: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LazyState<T = f64> {
    m_fea: Matrix<T>,
    m_grad: Matrix<T>,
    /// Clock value of the last write per row, `None` before the first.
    fea_written: Vec<Option<u64>>,
    grad_written: Vec<Option<u64>>,
    clock: u64,
}

impl<T: Real> LazyState<T> {
    pub fn new(num_nodes: usize, channels: usize) -> Self {
        Self {
            m_fea: Matrix::zeros(num_nodes, channels),
            m_grad: Matrix::zeros(num_nodes, channels),
            fea_written: vec![None; num_nodes],
            grad_written: vec![None; num_nodes],
            clock: 0,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.m_fea.rows()
    }

    pub fn channels(&self) -> usize {
        self.m_fea.cols()
    }

    /// Bytes held by the two stores, `2 * N * C * size_of::<T>()`.
    pub fn store_bytes(&self) -> usize {
        2 * self.num_nodes() * self.channels() * T::BYTES
    }

    pub fn matrix(&self, which: Store) -> &Matrix<T> {
        match which {
            Store::Features => &self.m_fea,
            Store::Gradients => &self.m_grad,
        }
    }

    pub fn initialized(&self, which: Store) -> Vec<bool> {
        self.stamps(which).iter().map(Option::is_some).collect()
    }

    fn stamps(&self, which: Store) -> &[Option<u64>] {
        match which {
            Store::Features => &self.fea_written,
            Store::Gradients => &self.grad_written,
        }
    }

    /// Advances the write clock; the trainer ticks once per optimizer iteration.
    pub fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Rows for `nodes` in the given order. Never-written rows come back as
    /// zeros with `initialized == false`.
    pub fn gather(&self, which: Store, nodes: &[usize]) -> Result<Gathered<T>> {
        let rows = self.matrix(which).gather_rows(nodes)?;
        let stamps = self.stamps(which);
        Ok(Gathered { rows, initialized: nodes.iter().map(|&n| stamps[n].is_some()).collect() })
    }

    /// Overwrites the rows for `nodes` with `rows` and stamps them with the
    /// current clock. A node listed twice keeps the later row.
    pub fn scatter(&mut self, which: Store, nodes: &[usize], rows: &Matrix<T>) -> Result<()> {
        if rows.rows() != nodes.len() || rows.cols() != self.channels() {
            return Err(Error::shape(format!(
                "scatter of {}x{} rows into {} nodes of a {}-channel store",
                rows.rows(),
                rows.cols(),
                nodes.len(),
                self.channels()
            )));
        }
        let n = self.num_nodes();
        if let Some(&bad) = nodes.iter().find(|&&v| v >= n) {
            return Err(Error::NodeOutOfRange { id: bad, num_nodes: n });
        }
        let clock = self.clock;
        let (m, stamps) = match which {
            Store::Features => (&mut self.m_fea, &mut self.fea_written),
            Store::Gradients => (&mut self.m_grad, &mut self.grad_written),
        };
        for (k, &v) in nodes.iter().enumerate() {
            m.row_mut(v).copy_from_slice(rows.row(k));
            stamps[v] = Some(clock);
        }
        Ok(())
    }

    /// Ticks since each node's row was last written, `None` if never.
    pub fn staleness(&self, which: Store, nodes: &[usize]) -> Vec<Option<u64>> {
        let stamps = self.stamps(which);
        nodes.iter().map(|&v| stamps.get(v).copied().flatten().map(|s| self.clock - s)).collect()
    }

    pub fn write_checkpoint(&self, mut w: impl Write) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.num_nodes() as u64).to_le_bytes())?;
        w.write_all(&(self.channels() as u64).to_le_bytes())?;
        for which in [Store::Features, Store::Gradients] {
            let m = self.matrix(which);
            for (r, stamp) in self.stamps(which).iter().enumerate() {
                for &v in m.row(r) {
                    let x = if stamp.is_some() { v.as_f64() } else { f64::NAN };
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    /// Reloads a checkpoint. Write stamps restart at clock zero.
    pub fn read_checkpoint(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("state checkpoint magic is not LZST".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported state checkpoint version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let c = u64::from_le_bytes(b8) as usize;
        let mut state = Self::new(n, c);
        let mut row = vec![0.0f64; c];
        for which in [Store::Features, Store::Gradients] {
            for v in 0..n {
                for x in row.iter_mut() {
                    r.read_exact(&mut b8)?;
                    *x = f64::from_le_bytes(b8);
                }
                let written = !row.iter().any(|x| x.is_nan());
                if !written {
                    continue;
                }
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("state checkpoint"));
                }
                let (m, stamps) = match which {
                    Store::Features => (&mut state.m_fea, &mut state.fea_written),
                    Store::Gradients => (&mut state.m_grad, &mut state.grad_written),
                };
                for (dst, &x) in m.row_mut(v).iter_mut().zip(&row) {
                    *dst = T::lit(x);
                }
                stamps[v] = Some(0);
            }
        }
        Ok(state)
    }
}
