//! Exercises the native adapter boundary with an in-process test double that
//! implements the same C function table. Ciphertexts are 16-byte
//! `(nonce, masked bit)` pairs under a 64-bit key; gates are evaluated with
//! the evaluation key, which in this double equals the secret.

use std::collections::HashMap;
use std::ffi::{c_char, CStr};
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use ocwc::dataset::Dataset;
use ocwc::fixtures::{table2, table3};
use ocwc::obool::fhe::{FheEngine, NativeApi, GATE_AND, GATE_CONST, GATE_NOT, GATE_XOR};
use ocwc::obool::{BackendError, Circuit, CircuitError, Engine, SimEngine, TraceLevel};
use ocwc::pcwc::{select, Algorithm, EncryptedDatasetState};
use ocwc::protocol::{gen_dataset, run_protocol};

const CT_SIZE: usize = 16;

#[derive(Default)]
struct Session {
    eval_key: Option<u64>,
    secret: Option<u64>,
    cts: Vec<(u64, u64)>,
    nonce: u64,
    last_error: String,
}

static SESSIONS: Mutex<Option<HashMap<u64, Session>>> = Mutex::new(None);
static NEXT_SESSION: AtomicU64 = AtomicU64::new(1);

fn pad_bit(key: u64, nonce: u64) -> u64 {
    (key ^ nonce.wrapping_mul(0x9e37_79b9_7f4a_7c15)).count_ones() as u64 & 1
}

fn with_session<R>(
    id: u64,
    f: impl FnOnce(&mut Session) -> Result<R, (i32, String)>,
) -> Result<R, i32> {
    let mut guard = SESSIONS.lock().unwrap();
    let Some(s) = guard.get_or_insert_with(HashMap::new).get_mut(&id) else {
        return Err(-1);
    };
    f(s).map_err(|(code, msg)| {
        s.last_error = msg;
        code
    })
}

fn status(r: Result<(), i32>) -> i32 {
    r.err().unwrap_or(0)
}

impl Session {
    fn fresh(&mut self, key: u64, bit: u64) -> u64 {
        self.nonce += 1;
        self.cts.push((self.nonce, bit ^ pad_bit(key, self.nonce)));
        self.cts.len() as u64
    }

    fn open(&self, key: u64, h: u64) -> Result<u64, (i32, String)> {
        let &(nonce, masked) = (h as usize)
            .checked_sub(1)
            .and_then(|i| self.cts.get(i))
            .ok_or((3, format!("unknown handle {h}")))?;
        Ok(masked ^ pad_bit(key, nonce))
    }

    fn eval_key(&self) -> Result<u64, (i32, String)> {
        self.eval_key
            .ok_or((2, "no evaluation key loaded".to_string()))
    }
}

unsafe extern "C" fn create_session() -> u64 {
    let id = NEXT_SESSION.fetch_add(1, Ordering::Relaxed);
    SESSIONS
        .lock()
        .unwrap()
        .get_or_insert_with(HashMap::new)
        .insert(id, Session::default());
    id
}

unsafe extern "C" fn keygen(session: u64, seed: u64) -> i32 {
    status(with_session(session, |s| {
        let key = seed.wrapping_mul(0x2545_f491_4f6c_dd1d) | 1;
        s.eval_key = Some(key);
        s.secret = Some(key);
        Ok(())
    }))
}

unsafe fn dir_of(dir: *const c_char) -> PathBuf {
    PathBuf::from(CStr::from_ptr(dir).to_string_lossy().into_owned())
}

unsafe extern "C" fn save_keys(session: u64, dir: *const c_char) -> i32 {
    let dir = dir_of(dir);
    status(with_session(session, |s| {
        let key = s.secret.ok_or((2, "no secret key".to_string()))?;
        fs::write(dir.join("secret.key"), format!("mock {key}"))
            .and_then(|_| fs::write(dir.join("eval.key"), format!("mock {key}")))
            .map_err(|e| (4, e.to_string()))
    }))
}

unsafe extern "C" fn load_keys(session: u64, dir: *const c_char, with_secret: i32) -> i32 {
    let dir = dir_of(dir);
    status(with_session(session, |s| {
        let read = |name: &str| -> Result<u64, (i32, String)> {
            let text = fs::read_to_string(dir.join(name)).map_err(|e| (4, e.to_string()))?;
            text.trim_start_matches("mock ")
                .parse()
                .map_err(|_| (5, format!("{name} is not a key file")))
        };
        s.eval_key = Some(read("eval.key")?);
        if with_secret != 0 {
            s.secret = Some(read("secret.key")?);
        }
        Ok(())
    }))
}

unsafe extern "C" fn encrypt_bit(session: u64, bit: i32, out: *mut u64) -> i32 {
    match with_session(session, |s| {
        let key = s
            .secret
            .ok_or((2, "encryption needs the secret key".to_string()))?;
        Ok(s.fresh(key, (bit != 0) as u64))
    }) {
        Ok(h) => {
            *out = h;
            0
        }
        Err(c) => c,
    }
}

unsafe extern "C" fn gate(session: u64, kind: i32, a: u64, b: u64, c: u64, out: *mut u64) -> i32 {
    match with_session(session, |s| {
        let key = s.eval_key()?;
        let v = match kind {
            GATE_XOR => s.open(key, a)? ^ s.open(key, b)?,
            GATE_AND => s.open(key, a)? & s.open(key, b)?,
            GATE_NOT => 1 ^ s.open(key, a)?,
            GATE_CONST => (a != 0) as u64,
            4 => {
                if s.open(key, a)? == 1 {
                    s.open(key, b)?
                } else {
                    s.open(key, c)?
                }
            }
            other => return Err((6, format!("unknown gate kind {other}"))),
        };
        Ok(s.fresh(key, v))
    }) {
        Ok(h) => {
            *out = h;
            0
        }
        Err(c) => c,
    }
}

unsafe extern "C" fn decrypt_bit(session: u64, h: u64, out: *mut i32) -> i32 {
    match with_session(session, |s| {
        let key = s
            .secret
            .ok_or((2, "decryption needs the secret key".to_string()))?;
        s.open(key, h)
    }) {
        Ok(v) => {
            *out = v as i32;
            0
        }
        Err(c) => c,
    }
}

unsafe extern "C" fn ciphertext_size(session: u64, out: *mut u64) -> i32 {
    status(with_session(session, |_| {
        *out = CT_SIZE as u64;
        Ok(())
    }))
}

unsafe extern "C" fn export_bit(session: u64, h: u64, buf: *mut u8, cap: u64) -> i32 {
    match with_session(session, |s| {
        let &(nonce, masked) = (h as usize)
            .checked_sub(1)
            .and_then(|i| s.cts.get(i))
            .ok_or((3, format!("unknown handle {h}")))?;
        if (cap as usize) < CT_SIZE {
            return Err((7, "buffer too small".into()));
        }
        Ok((nonce, masked))
    }) {
        Ok((nonce, masked)) => {
            let out = std::slice::from_raw_parts_mut(buf, CT_SIZE);
            out[..8].copy_from_slice(&nonce.to_le_bytes());
            out[8..].copy_from_slice(&masked.to_le_bytes());
            0
        }
        Err(c) => c,
    }
}

unsafe extern "C" fn import_bit(session: u64, buf: *const u8, len: u64, out: *mut u64) -> i32 {
    let bytes = std::slice::from_raw_parts(buf, len as usize).to_vec();
    match with_session(session, |s| {
        if bytes.len() != CT_SIZE {
            return Err((8, "wrong ciphertext length".into()));
        }
        let nonce = u64::from_le_bytes(bytes[..8].try_into().unwrap());
        let masked = u64::from_le_bytes(bytes[8..].try_into().unwrap());
        s.cts.push((nonce, masked & 1));
        s.nonce = s.nonce.max(nonce);
        Ok(s.cts.len() as u64)
    }) {
        Ok(h) => {
            *out = h;
            0
        }
        Err(c) => c,
    }
}

unsafe extern "C" fn last_error(session: u64, buf: *mut c_char, cap: u64) -> i32 {
    let msg = SESSIONS
        .lock()
        .unwrap()
        .get_or_insert_with(HashMap::new)
        .get(&session)
        .map(|s| s.last_error.clone())
        .unwrap_or_default();
    let n = msg.len().min(cap.saturating_sub(1) as usize);
    std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
    *buf.add(n) = 0;
    msg.len() as i32
}

unsafe extern "C" fn destroy(session: u64) {
    if let Some(map) = SESSIONS.lock().unwrap().as_mut() {
        map.remove(&session);
    }
}

fn mock_api() -> NativeApi {
    NativeApi {
        create_session,
        keygen,
        save_keys,
        load_keys,
        encrypt_bit,
        gate,
        decrypt_bit,
        ciphertext_size,
        export_bit,
        import_bit,
        last_error,
        destroy,
    }
}

fn owner(seed: u64) -> FheEngine {
    let mut e = FheEngine::new(mock_api()).unwrap();
    e.keygen(seed).unwrap();
    e
}

#[test]
fn gate_examples() {
    let mut c = Circuit::new(owner(1));
    let (one, zero) = (c.encrypt(true).unwrap(), c.encrypt(false).unwrap());
    let x = c.xor(one, zero).unwrap();
    let a = c.and(one, one).unwrap();
    let n = c.not(one).unwrap();
    assert!(c.decrypt(x).unwrap());
    assert!(c.decrypt(a).unwrap());
    assert!(!c.decrypt(n).unwrap());
    for b in [false, true] {
        let e = c.encrypt(b).unwrap();
        assert_eq!(c.decrypt(e).unwrap(), b);
    }
}

#[test]
fn four_bit_adder() {
    let mut c = Circuit::new(owner(2));
    let x = c.encrypt_word(6, 4).unwrap();
    let y = c.encrypt_word(7, 4).unwrap();
    let s = c.add(&x, &y).unwrap();
    assert_eq!(c.decrypt_word(&s).unwrap(), 13);
}

#[test]
fn native_mux() {
    let mut e = owner(3);
    let (t, f) = (e.encrypt(true).unwrap(), e.encrypt(false).unwrap());
    let m = e.native_mux(t, f, t).unwrap();
    assert!(!e.decrypt(m).unwrap());
    let m = e.native_mux(f, f, t).unwrap();
    assert!(e.decrypt(m).unwrap());
}

#[test]
fn adapter_errors_carry_the_native_message() {
    let mut e = owner(4);
    let err = e.not(999).unwrap_err();
    match err {
        BackendError::Native {
            call,
            code,
            message,
        } => {
            assert_eq!(call, "gate");
            assert_eq!(code, 3);
            assert!(message.contains("unknown handle 999"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(e.import(&[0u8; 3]).is_err());
}

#[test]
fn evaluation_key_cannot_decrypt() {
    let dir = tempfile::tempdir().unwrap();
    let o = owner(5);
    o.save_keys(dir.path()).unwrap();
    let mut eval = FheEngine::new(mock_api()).unwrap();
    eval.load_keys(dir.path(), false).unwrap();
    let mut c = Circuit::new(eval);
    assert!(matches!(
        c.encrypt(true),
        Err(CircuitError::Backend(BackendError::Native { code: 2, .. }))
    ));
}

#[test]
fn foreign_key_decryption_does_not_crash() {
    let mut a = owner(6);
    let mut b = owner(7);
    for bit in [false, true] {
        let h = a.encrypt(bit).unwrap();
        let blob = a.export(h).unwrap();
        let h2 = b.import(&blob).unwrap();
        let _ = b.decrypt(h2).unwrap();
    }
}

fn sim_and_mock(ds: &Dataset, alg: Algorithm) -> ((Vec<bool>, String), (Vec<bool>, String)) {
    let mut sim = Circuit::with_trace(SimEngine::owner(), TraceLevel::Digest);
    let enc = EncryptedDatasetState::encrypt(&mut sim, ds).unwrap();
    let m = select(&mut sim, &enc, alg).unwrap();
    let s = (
        m.decrypt(&mut sim).unwrap(),
        sim.transcript().digest().unwrap(),
    );

    let mut fhe = Circuit::with_trace(owner(8), TraceLevel::Digest);
    let enc = EncryptedDatasetState::encrypt(&mut fhe, ds).unwrap();
    let m = select(&mut fhe, &enc, alg).unwrap();
    let f = (
        m.decrypt(&mut fhe).unwrap(),
        fhe.transcript().digest().unwrap(),
    );
    (s, f)
}

#[test]
fn table3_through_the_adapter() {
    let (sim, fhe) = sim_and_mock(&table3(), Algorithm::Improved);
    assert_eq!(fhe.0, [true, false, false, true, false]);
    assert_eq!(sim, fhe);
}

#[test]
fn backends_are_interchangeable_on_small_instances() {
    for seed in 0..12u64 {
        let n = 1 + (seed as usize * 5) % 8;
        let k = 1 + (seed as usize) % 4;
        let ds = gen_dataset(n, k, seed, (seed % 2 == 0).then_some(1))
            .unwrap()
            .dataset;
        for alg in [Algorithm::Naive, Algorithm::Improved] {
            let (sim, fhe) = sim_and_mock(&ds, alg);
            assert_eq!(sim, fhe, "n={n} k={k} {alg}");
        }
    }
}

#[test]
fn protocol_round_over_the_adapter() {
    let dir = tempfile::tempdir().unwrap();
    let o = owner(9);
    o.save_keys(dir.path()).unwrap();
    let mut eval = FheEngine::new(mock_api()).unwrap();
    eval.load_keys(dir.path(), false).unwrap();
    let mut own = Circuit::new(o);
    let mut ana = Circuit::new(eval);
    let run = run_protocol(&mut own, &mut ana, 1, &table2(), Algorithm::Improved).unwrap();
    assert_eq!(run.selected, ["f1", "f2", "f4"]);
    assert_eq!(run.messages.len(), 2);
    assert_eq!(run.analyst_decrypt_calls, 0);
}
