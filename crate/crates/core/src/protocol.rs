//! Single-round outsourcing workflow: key files, the encrypted container
//! format, the owner/analyst split and synthetic dataset generation.
//!
//! Container layout (all integers little-endian):
//!
//! ```text
//! "OCWC" | version u16 | backend u8 | payload u8 | key_id u64
//! n u32 | n_pad u32 | k u32 | label_width u8 | ciphertext_size u32 | columns u32
//! columns × (byte_len u64 | ciphertexts)
//! ```
//!
//! A dataset payload holds `k` feature columns, then class, then validity,
//! each `n_pad` ciphertexts long. A mask payload holds one column of `k`
//! ciphertexts.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{decode_selection, pad, Dataset, DatasetError};
use crate::obool::fhe::{FheEngine, NativeApi};
use crate::obool::{
    BackendError, BackendKind, BinaryGate, Bit, Circuit, CircuitError, Engine, GateCounts, Handle,
    SimEngine, TraceLevel,
};
use crate::pcwc::{select, Algorithm, EncryptedDatasetState, PcwcError};

pub const MAGIC: &[u8; 4] = b"OCWC";
pub const FORMAT_VERSION: u16 = 1;
pub const SECRET_KEY_FILE: &str = "secret.key";
pub const EVAL_KEY_FILE: &str = "eval.key";
/// Largest supported padded row count; labels and positions must fit a word.
pub const MAX_PADDED_ROWS: usize = 1 << 31;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("{0}")]
    Usage(String),
    #[error("malformed container: {0}")]
    Format(String),
    #[error("unsupported container version {found} (this build reads version {FORMAT_VERSION})")]
    Version { found: u16 },
    #[error("container was produced under key {found:016x}, but key {expected:016x} is loaded")]
    KeyMismatch { expected: u64, found: u64 },
    #[error("dimension overflow: {0}")]
    Overflow(String),
    #[error("missing key file {0}")]
    MissingKey(PathBuf),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Select(#[from] PcwcError),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Coarse error classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Backend,
}

impl ProtocolError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            ProtocolError::Usage(_) => ErrorCategory::Usage,
            ProtocolError::Backend(_) | ProtocolError::MissingKey(_) => ErrorCategory::Backend,
            ProtocolError::Circuit(CircuitError::Backend(_)) => ErrorCategory::Backend,
            ProtocolError::Select(PcwcError::Circuit(CircuitError::Backend(_))) => {
                ErrorCategory::Backend
            }
            ProtocolError::Circuit(CircuitError::WidthMismatch { .. }) => ErrorCategory::Usage,
            _ => ErrorCategory::Data,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ProtocolError + '_ {
    move |source| ProtocolError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    Dataset,
    Mask,
}

impl PayloadKind {
    fn code(self) -> u8 {
        match self {
            PayloadKind::Dataset => 0,
            PayloadKind::Mask => 1,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(PayloadKind::Dataset),
            1 => Some(PayloadKind::Mask),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileHeader {
    pub backend: BackendKind,
    pub payload: PayloadKind,
    pub key_id: u64,
    pub n: u32,
    pub n_pad: u32,
    pub k: u32,
    pub label_width: u8,
    pub ciphertext_size: u32,
}

impl FileHeader {
    fn expected_columns(&self) -> usize {
        match self.payload {
            PayloadKind::Dataset => self.k as usize + 2,
            PayloadKind::Mask => 1,
        }
    }

    fn column_len(&self) -> usize {
        match self.payload {
            PayloadKind::Dataset => self.n_pad as usize,
            PayloadKind::Mask => self.k as usize,
        }
    }
}

/// Encrypted dataset or mask container; doubles as the wire message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedFile {
    pub header: FileHeader,
    /// Concatenated ciphertexts, one entry per column.
    pub columns: Vec<Vec<u8>>,
}

impl EncryptedFile {
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let h = &self.header;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[h.backend.code(), h.payload.code()])?;
        w.write_all(&h.key_id.to_le_bytes())?;
        for v in [h.n, h.n_pad, h.k] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[h.label_width])?;
        w.write_all(&h.ciphertext_size.to_le_bytes())?;
        w.write_all(&(self.columns.len() as u32).to_le_bytes())?;
        for col in &self.columns {
            w.write_all(&(col.len() as u64).to_le_bytes())?;
            w.write_all(col)?;
        }
        w.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, ProtocolError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)
            .map_err(io_err(Path::new("<input>")))?;
        Self::from_bytes(&buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(ProtocolError::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes(cur.array()?);
        if version != FORMAT_VERSION {
            return Err(ProtocolError::Version { found: version });
        }
        let backend = BackendKind::from_code(cur.u8()?)
            .ok_or_else(|| ProtocolError::Format("unknown backend code".into()))?;
        let payload = PayloadKind::from_code(cur.u8()?)
            .ok_or_else(|| ProtocolError::Format("unknown payload kind".into()))?;
        let key_id = u64::from_le_bytes(cur.array()?);
        let n = u32::from_le_bytes(cur.array()?);
        let n_pad = u32::from_le_bytes(cur.array()?);
        let k = u32::from_le_bytes(cur.array()?);
        let label_width = cur.u8()?;
        let ciphertext_size = u32::from_le_bytes(cur.array()?);
        let count = u32::from_le_bytes(cur.array()?) as usize;
        let header = FileHeader {
            backend,
            payload,
            key_id,
            n,
            n_pad,
            k,
            label_width,
            ciphertext_size,
        };
        if payload == PayloadKind::Dataset
            && (n == 0
                || !n_pad.is_power_of_two()
                || n > n_pad
                || label_width as u32 != n_pad.trailing_zeros())
        {
            return Err(ProtocolError::Format("inconsistent row dimensions".into()));
        }
        if k == 0 || ciphertext_size == 0 {
            return Err(ProtocolError::Format(
                "zero feature count or ciphertext size".into(),
            ));
        }
        if count != header.expected_columns() {
            return Err(ProtocolError::Format(format!(
                "expected {} columns, found {count}",
                header.expected_columns()
            )));
        }
        let col_bytes = header.column_len() as u64 * ciphertext_size as u64;
        let mut columns = Vec::with_capacity(count);
        for c in 0..count {
            let len = u64::from_le_bytes(cur.array()?);
            if len != col_bytes {
                return Err(ProtocolError::Format(format!(
                    "column {c} holds {len} bytes, expected {col_bytes}"
                )));
            }
            columns.push(cur.take(len as usize)?.to_vec());
        }
        if cur.pos != bytes.len() {
            return Err(ProtocolError::Format("trailing bytes".into()));
        }
        Ok(EncryptedFile { header, columns })
    }

    pub fn save(&self, path: &Path) -> Result<(), ProtocolError> {
        fs::write(path, self.to_bytes()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, ProtocolError> {
        Self::from_bytes(&fs::read(path).map_err(io_err(path))?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ProtocolError::Format("truncated container".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], ProtocolError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take(1)?[0])
    }
}

/// Either engine behind one type, so file-level code is backend-agnostic.
pub enum AnyEngine {
    Sim(SimEngine),
    Fhe(FheEngine),
}

impl Engine for AnyEngine {
    fn kind(&self) -> BackendKind {
        match self {
            AnyEngine::Sim(e) => e.kind(),
            AnyEngine::Fhe(e) => e.kind(),
        }
    }

    fn constant(&mut self, value: bool) -> Result<Handle, BackendError> {
        match self {
            AnyEngine::Sim(e) => e.constant(value),
            AnyEngine::Fhe(e) => e.constant(value),
        }
    }

    fn binary(&mut self, gate: BinaryGate, a: Handle, b: Handle) -> Result<Handle, BackendError> {
        match self {
            AnyEngine::Sim(e) => e.binary(gate, a, b),
            AnyEngine::Fhe(e) => e.binary(gate, a, b),
        }
    }

    fn not(&mut self, a: Handle) -> Result<Handle, BackendError> {
        match self {
            AnyEngine::Sim(e) => e.not(a),
            AnyEngine::Fhe(e) => e.not(a),
        }
    }

    fn encrypt(&mut self, value: bool) -> Result<Handle, BackendError> {
        match self {
            AnyEngine::Sim(e) => e.encrypt(value),
            AnyEngine::Fhe(e) => e.encrypt(value),
        }
    }

    fn decrypt(&mut self, h: Handle) -> Result<bool, BackendError> {
        match self {
            AnyEngine::Sim(e) => e.decrypt(h),
            AnyEngine::Fhe(e) => e.decrypt(h),
        }
    }

    fn export(&self, h: Handle) -> Result<Vec<u8>, BackendError> {
        match self {
            AnyEngine::Sim(e) => e.export(h),
            AnyEngine::Fhe(e) => e.export(h),
        }
    }

    fn import(&mut self, blob: &[u8]) -> Result<Handle, BackendError> {
        match self {
            AnyEngine::Sim(e) => e.import(blob),
            AnyEngine::Fhe(e) => e.import(blob),
        }
    }

    fn ciphertext_size(&self) -> usize {
        match self {
            AnyEngine::Sim(e) => e.ciphertext_size(),
            AnyEngine::Fhe(e) => e.ciphertext_size(),
        }
    }
}

/// Engine opened from a key directory, with the identifier of its key set.
pub struct KeyedEngine {
    pub engine: AnyEngine,
    pub key_id: u64,
}

fn key_id_of(material: &[u8]) -> u64 {
    let d = Sha256::digest(material);
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

fn write_atomically(files: &[(PathBuf, Vec<u8>)]) -> Result<(), ProtocolError> {
    let tmp: Vec<PathBuf> = files
        .iter()
        .map(|(p, _)| p.with_extension("key.partial"))
        .collect();
    let cleanup = |tmp: &[PathBuf]| {
        for t in tmp {
            let _ = fs::remove_file(t);
        }
    };
    for ((_, data), t) in files.iter().zip(&tmp) {
        if let Err(e) = fs::write(t, data) {
            cleanup(&tmp);
            return Err(io_err(t)(e));
        }
    }
    for (i, ((dst, _), t)) in files.iter().zip(&tmp).enumerate() {
        if let Err(e) = fs::rename(t, dst) {
            cleanup(&tmp);
            for (d, _) in &files[..i] {
                let _ = fs::remove_file(d);
            }
            return Err(io_err(dst)(e));
        }
    }
    Ok(())
}

/// Generates a key set in `dir`. The simulation backend writes a random
/// token as `secret.key` and its identifier as `eval.key`; the FHE backend
/// delegates to the native adapter.
pub fn keygen(backend: BackendKind, dir: &Path, seed: Option<u64>) -> Result<u64, ProtocolError> {
    match backend {
        BackendKind::Sim => {
            let mut token = [0u8; 32];
            match seed {
                Some(s) => ChaCha8Rng::seed_from_u64(s).fill_bytes(&mut token),
                None => rand::thread_rng().fill_bytes(&mut token),
            }
            let secret = hex(&token);
            let id = key_id_of(secret.as_bytes());
            write_atomically(&[
                (
                    dir.join(SECRET_KEY_FILE),
                    format!("sim {secret}\n").into_bytes(),
                ),
                (
                    dir.join(EVAL_KEY_FILE),
                    format!("sim {id:016x}\n").into_bytes(),
                ),
            ])?;
            Ok(id)
        }
        BackendKind::Fhe => {
            let mut engine = FheEngine::new(NativeApi::linked()?)?;
            engine.keygen(seed.unwrap_or_else(|| rand::thread_rng().gen()))?;
            engine.save_keys(dir)?;
            fhe_key_id(dir)
        }
    }
}

fn fhe_key_id(dir: &Path) -> Result<u64, ProtocolError> {
    let path = dir.join(EVAL_KEY_FILE);
    let bytes = fs::read(&path).map_err(|_| ProtocolError::MissingKey(path.clone()))?;
    Ok(key_id_of(&bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn read_sim_key(path: &Path) -> Result<String, ProtocolError> {
    let text =
        fs::read_to_string(path).map_err(|_| ProtocolError::MissingKey(path.to_path_buf()))?;
    match text.trim().split_once(' ') {
        Some(("sim", v)) if !v.is_empty() => Ok(v.to_string()),
        _ => Err(ProtocolError::Format(format!(
            "{} is not a simulation key file",
            path.display()
        ))),
    }
}

/// Opens the data-owner engine (secret key required).
pub fn open_owner(backend: BackendKind, dir: &Path) -> Result<KeyedEngine, ProtocolError> {
    match backend {
        BackendKind::Sim => {
            let secret = read_sim_key(&dir.join(SECRET_KEY_FILE))?;
            Ok(KeyedEngine {
                engine: AnyEngine::Sim(SimEngine::owner()),
                key_id: key_id_of(secret.as_bytes()),
            })
        }
        BackendKind::Fhe => {
            let mut e = FheEngine::new(NativeApi::linked()?)?;
            e.load_keys(dir, true)?;
            Ok(KeyedEngine {
                engine: AnyEngine::Fhe(e),
                key_id: fhe_key_id(dir)?,
            })
        }
    }
}

/// Opens the analyst engine (evaluation key only).
pub fn open_evaluator(backend: BackendKind, dir: &Path) -> Result<KeyedEngine, ProtocolError> {
    match backend {
        BackendKind::Sim => {
            let id = read_sim_key(&dir.join(EVAL_KEY_FILE))?;
            let key_id = u64::from_str_radix(&id, 16)
                .map_err(|_| ProtocolError::Format("evaluation key id is not hex".into()))?;
            Ok(KeyedEngine {
                engine: AnyEngine::Sim(SimEngine::evaluator()),
                key_id,
            })
        }
        BackendKind::Fhe => {
            let mut e = FheEngine::new(NativeApi::linked()?)?;
            e.load_keys(dir, false)?;
            Ok(KeyedEngine {
                engine: AnyEngine::Fhe(e),
                key_id: fhe_key_id(dir)?,
            })
        }
    }
}

fn export_column<E: Engine>(circ: &Circuit<E>, bits: &[Bit]) -> Result<Vec<u8>, ProtocolError> {
    let mut out = Vec::with_capacity(bits.len() * circ.engine().ciphertext_size());
    for &b in bits {
        out.extend(circ.export(b)?);
    }
    Ok(out)
}

fn import_column<E: Engine>(
    circ: &mut Circuit<E>,
    blob: &[u8],
    ct: usize,
) -> Result<Vec<Bit>, ProtocolError> {
    blob.chunks(ct)
        .map(|c| circ.import(c).map_err(ProtocolError::from))
        .collect()
}

fn check_backend<E: Engine>(circ: &Circuit<E>, h: &FileHeader) -> Result<(), ProtocolError> {
    let kind = circ.engine().kind();
    if h.backend != kind {
        return Err(ProtocolError::Usage(format!(
            "container was produced by the {} backend, but {kind} is selected",
            h.backend
        )));
    }
    if h.ciphertext_size as usize != circ.engine().ciphertext_size() {
        return Err(ProtocolError::Format(
            "ciphertext size does not match the backend".into(),
        ));
    }
    Ok(())
}

/// Owner side: pad, encrypt and serialize `ds`.
pub fn encrypt_dataset<E: Engine>(
    circ: &mut Circuit<E>,
    ds: &Dataset,
    key_id: u64,
) -> Result<EncryptedFile, ProtocolError> {
    let p = pad(ds);
    if p.n_pad() > MAX_PADDED_ROWS || ds.k() > u32::MAX as usize {
        return Err(ProtocolError::Overflow(format!(
            "{} rows × {} features exceed the container limits",
            ds.n(),
            ds.k()
        )));
    }
    let state = EncryptedDatasetState::encrypt(circ, ds)?;
    let mut columns = Vec::with_capacity(ds.k() + 2);
    for col in state.features() {
        columns.push(export_column(circ, col)?);
    }
    columns.push(export_column(circ, state.classes())?);
    columns.push(export_column(circ, state.validity())?);
    Ok(EncryptedFile {
        header: FileHeader {
            backend: circ.engine().kind(),
            payload: PayloadKind::Dataset,
            key_id,
            n: ds.n() as u32,
            n_pad: p.n_pad() as u32,
            k: ds.k() as u32,
            label_width: state.label_width() as u8,
            ciphertext_size: circ.engine().ciphertext_size() as u32,
        },
        columns,
    })
}

/// Imports a dataset container into `circ`.
pub fn import_dataset<E: Engine>(
    circ: &mut Circuit<E>,
    file: &EncryptedFile,
) -> Result<EncryptedDatasetState, ProtocolError> {
    let h = &file.header;
    if h.payload != PayloadKind::Dataset {
        return Err(ProtocolError::Usage(
            "expected an encrypted dataset, found a mask".into(),
        ));
    }
    check_backend(circ, h)?;
    let ct = h.ciphertext_size as usize;
    let mut cols = file
        .columns
        .iter()
        .map(|c| import_column(circ, c, ct))
        .collect::<Result<Vec<_>, _>>()?;
    let validity = cols.pop().expect("k + 2 columns");
    let classes = cols.pop().expect("k + 2 columns");
    Ok(EncryptedDatasetState::from_columns(
        cols, classes, validity,
    )?)
}

/// Analyst side: run the selection on an imported container and package the
/// encrypted mask. Never decrypts.
pub fn select_file<E: Engine>(
    circ: &mut Circuit<E>,
    file: &EncryptedFile,
    algorithm: Algorithm,
) -> Result<EncryptedFile, ProtocolError> {
    let state = import_dataset(circ, file)?;
    let mask = select(circ, &state, algorithm)?;
    Ok(EncryptedFile {
        header: FileHeader {
            payload: PayloadKind::Mask,
            ..file.header.clone()
        },
        columns: vec![export_column(circ, mask.bits())?],
    })
}

/// Owner side: decrypt a mask container.
pub fn decrypt_mask<E: Engine>(
    circ: &mut Circuit<E>,
    file: &EncryptedFile,
    key_id: u64,
) -> Result<Vec<bool>, ProtocolError> {
    let h = &file.header;
    if h.payload != PayloadKind::Mask {
        return Err(ProtocolError::Usage(
            "expected an encrypted mask, found a dataset".into(),
        ));
    }
    check_backend(circ, h)?;
    if h.key_id != key_id {
        return Err(ProtocolError::KeyMismatch {
            expected: key_id,
            found: h.key_id,
        });
    }
    let bits = import_column(circ, &file.columns[0], h.ciphertext_size as usize)?;
    Ok(bits
        .into_iter()
        .map(|b| circ.decrypt(b))
        .collect::<Result<_, _>>()?)
}

/// Owner side: decrypt a dataset container (round-trip checks).
pub fn decrypt_dataset<E: Engine>(
    circ: &mut Circuit<E>,
    file: &EncryptedFile,
) -> Result<Dataset, ProtocolError> {
    let state = import_dataset(circ, file)?;
    let n = file.header.n as usize;
    let mut rows = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(state.k());
        for col in state.features() {
            row.push(circ.decrypt(col[i])? as u8);
        }
        rows.push(row);
        classes.push(circ.decrypt(state.classes()[i])? as u8);
    }
    let refs: Vec<&[u8]> = rows.iter().map(Vec::as_slice).collect();
    Ok(Dataset::from_bits(&refs, &classes)?)
}

/// In-memory channel that counts messages between the two parties.
#[derive(Debug, Default)]
pub struct Transport {
    messages: Vec<(Party, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Owner,
    Analyst,
}

impl Transport {
    pub fn send(&mut self, from: Party, message: Vec<u8>) -> Vec<u8> {
        self.messages.push((from, message.len()));
        message
    }

    pub fn message_count(&self) -> usize {
        self.messages.len()
    }

    pub fn messages(&self) -> &[(Party, usize)] {
        &self.messages
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub mask: Vec<bool>,
    pub selected: Vec<String>,
    pub messages: Vec<(Party, usize)>,
    /// Decryptions attempted on the analyst side; always 0 on success.
    pub analyst_decrypt_calls: u64,
    pub counts: GateCounts,
    pub digest: Option<String>,
    pub elapsed: Duration,
}

/// Full round: the owner encrypts and sends, the analyst selects and
/// replies, the owner decrypts and decodes names.
pub fn run_protocol<O: Engine, A: Engine>(
    owner: &mut Circuit<O>,
    analyst: &mut Circuit<A>,
    key_id: u64,
    ds: &Dataset,
    algorithm: Algorithm,
) -> Result<ProtocolRun, ProtocolError> {
    let mut wire = Transport::default();
    let upload = encrypt_dataset(owner, ds, key_id)?;
    let received = wire.send(Party::Owner, upload.to_bytes());

    let before = analyst.counts();
    let start = Instant::now();
    let request = EncryptedFile::from_bytes(&received)?;
    let reply = select_file(analyst, &request, algorithm)?;
    let elapsed = start.elapsed();
    let counts = analyst.counts() - before;
    let reply = wire.send(Party::Analyst, reply.to_bytes());

    let mask = decrypt_mask(owner, &EncryptedFile::from_bytes(&reply)?, key_id)?;
    let selected = decode_selection(&mask, ds)?;
    Ok(ProtocolRun {
        mask,
        selected,
        messages: wire.messages().to_vec(),
        analyst_decrypt_calls: analyst.decrypt_calls(),
        counts,
        digest: analyst.transcript().digest(),
        elapsed,
    })
}

/// [`run_protocol`] on fresh simulation owner and evaluator engines.
pub fn run_protocol_sim(ds: &Dataset, algorithm: Algorithm) -> Result<ProtocolRun, ProtocolError> {
    let mut owner = Circuit::new(SimEngine::owner());
    let mut analyst = Circuit::with_trace(SimEngine::evaluator(), TraceLevel::Digest);
    run_protocol(&mut owner, &mut analyst, 0, ds, algorithm)
}

/// Synthetic dataset with the indices of the planted features (0-based).
#[derive(Debug, Clone)]
pub struct Generated {
    pub dataset: Dataset,
    pub planted: Vec<usize>,
}

/// Reproducible random binary dataset. With `planted = Some(s)` the class is
/// the XOR of `s` randomly chosen features; otherwise it is random.
pub fn gen_dataset(
    n: usize,
    k: usize,
    seed: u64,
    planted: Option<usize>,
) -> Result<Generated, ProtocolError> {
    if n == 0 || k == 0 {
        return Err(ProtocolError::Usage("n and k must be at least 1".into()));
    }
    if let Some(s) = planted {
        if s > k {
            return Err(ProtocolError::Usage(format!(
                "cannot plant {s} features in a dataset with k = {k}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<u8>> = (0..n)
        .map(|_| (0..k).map(|_| rng.gen::<bool>() as u8).collect())
        .collect();
    let (classes, planted): (Vec<u8>, Vec<usize>) = match planted {
        Some(s) => {
            let mut chosen = rand::seq::index::sample(&mut rng, k, s).into_vec();
            chosen.sort_unstable();
            let classes = rows
                .iter()
                .map(|r| chosen.iter().fold(0u8, |acc, &j| acc ^ r[j]))
                .collect();
            (classes, chosen)
        }
        None => (
            (0..n).map(|_| rng.gen::<bool>() as u8).collect(),
            Vec::new(),
        ),
    };
    let refs: Vec<&[u8]> = rows.iter().map(Vec::as_slice).collect();
    Ok(Generated {
        dataset: Dataset::from_bits(&refs, &classes)?,
        planted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::table2;

    #[test]
    fn container_round_trip() {
        let mut c = Circuit::new(SimEngine::owner());
        let file = encrypt_dataset(&mut c, &table2(), 42).unwrap();
        assert_eq!(file.columns.len(), 7);
        let bytes = file.to_bytes();
        assert_eq!(&bytes[..4], MAGIC);
        let back = EncryptedFile::from_bytes(&bytes).unwrap();
        assert_eq!(back, file);
        assert_eq!(decrypt_dataset(&mut c, &back).unwrap(), table2());
    }

    #[test]
    fn container_rejects_damage() {
        let mut c = Circuit::new(SimEngine::owner());
        let bytes = encrypt_dataset(&mut c, &table2(), 1).unwrap().to_bytes();
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(
            EncryptedFile::from_bytes(&v),
            Err(ProtocolError::Version { found: 9 })
        ));
        assert!(matches!(
            EncryptedFile::from_bytes(&bytes[..bytes.len() - 1]),
            Err(ProtocolError::Format(_))
        ));
        let mut v = bytes.clone();
        v.push(0);
        assert!(EncryptedFile::from_bytes(&v).is_err());
        let mut v = bytes;
        v[0] = b'X';
        assert!(EncryptedFile::from_bytes(&v).is_err());
    }

    #[test]
    fn protocol_on_table2() {
        for alg in [Algorithm::Naive, Algorithm::Improved] {
            let run = run_protocol_sim(&table2(), alg).unwrap();
            assert_eq!(run.selected, ["f1", "f2", "f4"]);
            assert_eq!(run.messages.len(), 2);
            assert_eq!(run.messages[0].0, Party::Owner);
            assert_eq!(run.messages[1].0, Party::Analyst);
            assert_eq!(run.analyst_decrypt_calls, 0);
        }
    }

    #[test]
    fn mask_under_other_key_is_rejected() {
        let mut owner = Circuit::new(SimEngine::owner());
        let mut analyst = Circuit::new(SimEngine::evaluator());
        let up = encrypt_dataset(&mut owner, &table2(), 7).unwrap();
        let reply = select_file(&mut analyst, &up, Algorithm::Improved).unwrap();
        assert!(matches!(
            decrypt_mask(&mut owner, &reply, 8),
            Err(ProtocolError::KeyMismatch { .. })
        ));
        assert_eq!(
            decrypt_mask(&mut owner, &reply, 7).unwrap(),
            [true, true, false, true, false]
        );
    }

    #[test]
    fn gen_dataset_examples() {
        let a = gen_dataset(8, 5, 7, Some(2)).unwrap();
        let b = gen_dataset(8, 5, 7, Some(2)).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.planted, b.planted);
        assert_eq!(a.planted.len(), 2);
        let mut mask = vec![false; 5];
        for &j in &a.planted {
            mask[j] = true;
        }
        let sub = crate::oracle::FeatureSubset::from_mask(mask);
        assert!(crate::oracle::is_consistent(&a.dataset, &sub));
        assert!(matches!(
            gen_dataset(8, 5, 7, Some(6)),
            Err(ProtocolError::Usage(_))
        ));
        assert!(gen_dataset(0, 5, 7, None).is_err());
        assert_ne!(
            gen_dataset(8, 5, 8, None).unwrap().dataset,
            gen_dataset(8, 5, 7, None).unwrap().dataset
        );
    }

    #[test]
    fn error_categories() {
        assert_eq!(
            ProtocolError::Usage("x".into()).category(),
            ErrorCategory::Usage
        );
        assert_eq!(
            ProtocolError::Version { found: 2 }.category(),
            ErrorCategory::Data
        );
        assert_eq!(
            ProtocolError::Backend(BackendError::Unavailable("x".into())).category(),
            ErrorCategory::Backend
        );
    }
}
