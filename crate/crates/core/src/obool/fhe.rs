//! Engine over a native gate-bootstrapping FHE adapter.
//!
//! The adapter is a separate C/C++ library exposing a flat function table
//! over integer handles (see `include/ocwc_fhe.h`). It holds no algorithm
//! logic: the circuit built in this crate drives it gate by gate. With the
//! `fhe-native` feature the table is linked from `libocwc_tfhe`; otherwise
//! [`NativeApi::linked`] reports the backend as unavailable. Any other table
//! with the same signatures (for instance a test double) can be plugged in
//! with [`FheEngine::new`].

use std::ffi::{c_char, CString};
use std::path::Path;

use super::{BackendError, BackendKind, BinaryGate, Engine, Handle};

pub const GATE_XOR: i32 = 0;
pub const GATE_AND: i32 = 1;
pub const GATE_NOT: i32 = 2;
pub const GATE_CONST: i32 = 3;
pub const GATE_MUX: i32 = 4;

pub type CreateSessionFn = unsafe extern "C" fn() -> u64;
pub type KeygenFn = unsafe extern "C" fn(session: u64, seed: u64) -> i32;
pub type SaveKeysFn = unsafe extern "C" fn(session: u64, dir: *const c_char) -> i32;
pub type LoadKeysFn =
    unsafe extern "C" fn(session: u64, dir: *const c_char, with_secret: i32) -> i32;
pub type EncryptBitFn = unsafe extern "C" fn(session: u64, bit: i32, out: *mut u64) -> i32;
pub type GateFn =
    unsafe extern "C" fn(session: u64, kind: i32, a: u64, b: u64, c: u64, out: *mut u64) -> i32;
pub type DecryptBitFn = unsafe extern "C" fn(session: u64, h: u64, out: *mut i32) -> i32;
pub type CiphertextSizeFn = unsafe extern "C" fn(session: u64, out: *mut u64) -> i32;
pub type ExportBitFn = unsafe extern "C" fn(session: u64, h: u64, buf: *mut u8, cap: u64) -> i32;
pub type ImportBitFn =
    unsafe extern "C" fn(session: u64, buf: *const u8, len: u64, out: *mut u64) -> i32;
pub type LastErrorFn = unsafe extern "C" fn(session: u64, buf: *mut c_char, cap: u64) -> i32;
pub type DestroyFn = unsafe extern "C" fn(session: u64);

/// Flat function table of the native adapter. Every call except
/// `create_session` and `destroy` returns 0 on success.
#[derive(Clone, Copy)]
pub struct NativeApi {
    pub create_session: CreateSessionFn,
    pub keygen: KeygenFn,
    pub save_keys: SaveKeysFn,
    pub load_keys: LoadKeysFn,
    pub encrypt_bit: EncryptBitFn,
    pub gate: GateFn,
    pub decrypt_bit: DecryptBitFn,
    pub ciphertext_size: CiphertextSizeFn,
    pub export_bit: ExportBitFn,
    pub import_bit: ImportBitFn,
    pub last_error: LastErrorFn,
    pub destroy: DestroyFn,
}

#[cfg(feature = "fhe-native")]
mod native {
    use std::ffi::c_char;

    #[link(name = "ocwc_tfhe")]
    extern "C" {
        pub fn ocwc_fhe_create_session() -> u64;
        pub fn ocwc_fhe_keygen(session: u64, seed: u64) -> i32;
        pub fn ocwc_fhe_save_keys(session: u64, dir: *const c_char) -> i32;
        pub fn ocwc_fhe_load_keys(session: u64, dir: *const c_char, with_secret: i32) -> i32;
        pub fn ocwc_fhe_encrypt_bit(session: u64, bit: i32, out: *mut u64) -> i32;
        pub fn ocwc_fhe_gate(session: u64, kind: i32, a: u64, b: u64, c: u64, out: *mut u64)
            -> i32;
        pub fn ocwc_fhe_decrypt_bit(session: u64, h: u64, out: *mut i32) -> i32;
        pub fn ocwc_fhe_ciphertext_size(session: u64, out: *mut u64) -> i32;
        pub fn ocwc_fhe_export_bit(session: u64, h: u64, buf: *mut u8, cap: u64) -> i32;
        pub fn ocwc_fhe_import_bit(session: u64, buf: *const u8, len: u64, out: *mut u64) -> i32;
        pub fn ocwc_fhe_last_error(session: u64, buf: *mut c_char, cap: u64) -> i32;
        pub fn ocwc_fhe_destroy(session: u64);
    }
}

impl NativeApi {
    /// The adapter linked into this build, if any.
    #[cfg(feature = "fhe-native")]
    pub fn linked() -> Result<NativeApi, BackendError> {
        use native::*;
        Ok(NativeApi {
            create_session: ocwc_fhe_create_session,
            keygen: ocwc_fhe_keygen,
            save_keys: ocwc_fhe_save_keys,
            load_keys: ocwc_fhe_load_keys,
            encrypt_bit: ocwc_fhe_encrypt_bit,
            gate: ocwc_fhe_gate,
            decrypt_bit: ocwc_fhe_decrypt_bit,
            ciphertext_size: ocwc_fhe_ciphertext_size,
            export_bit: ocwc_fhe_export_bit,
            import_bit: ocwc_fhe_import_bit,
            last_error: ocwc_fhe_last_error,
            destroy: ocwc_fhe_destroy,
        })
    }

    #[cfg(not(feature = "fhe-native"))]
    pub fn linked() -> Result<NativeApi, BackendError> {
        Err(BackendError::Unavailable(
            "this build does not link the native FHE adapter (enable the `fhe-native` feature)"
                .to_string(),
        ))
    }
}

/// One adapter session. Destroyed on drop.
pub struct FheEngine {
    api: NativeApi,
    session: u64,
    ct_size: usize,
}

impl FheEngine {
    /// Opens an empty session; keys must be generated or loaded before use.
    pub fn new(api: NativeApi) -> Result<Self, BackendError> {
        // SAFETY: the table's functions follow the documented C contract.
        let session = unsafe { (api.create_session)() };
        if session == 0 {
            return Err(BackendError::Native {
                call: "create_session",
                code: -1,
                message: "adapter refused to create a session".into(),
            });
        }
        Ok(FheEngine {
            api,
            session,
            ct_size: 0,
        })
    }

    fn check(&self, call: &'static str, code: i32) -> Result<(), BackendError> {
        if code == 0 {
            return Ok(());
        }
        let mut buf = vec![0u8; 512];
        // SAFETY: buffer is valid for `cap` bytes.
        let n = unsafe {
            (self.api.last_error)(self.session, buf.as_mut_ptr().cast(), buf.len() as u64)
        };
        let len = if n > 0 {
            (n as usize).min(buf.len())
        } else {
            buf.iter().position(|&b| b == 0).unwrap_or(0)
        };
        buf.truncate(len);
        Err(BackendError::Native {
            call,
            code,
            message: String::from_utf8_lossy(&buf).into_owned(),
        })
    }

    fn refresh_ct_size(&mut self) -> Result<(), BackendError> {
        let mut size = 0u64;
        // SAFETY: out-pointer is valid.
        let code = unsafe { (self.api.ciphertext_size)(self.session, &mut size) };
        self.check("ciphertext_size", code)?;
        self.ct_size = size as usize;
        Ok(())
    }

    pub fn keygen(&mut self, seed: u64) -> Result<(), BackendError> {
        // SAFETY: plain integer arguments.
        let code = unsafe { (self.api.keygen)(self.session, seed) };
        self.check("keygen", code)?;
        self.refresh_ct_size()
    }

    pub fn save_keys(&self, dir: &Path) -> Result<(), BackendError> {
        let dir = path_cstring(dir)?;
        // SAFETY: `dir` is a valid NUL-terminated string for the call.
        let code = unsafe { (self.api.save_keys)(self.session, dir.as_ptr()) };
        self.check("save_keys", code)
    }

    /// Loads the evaluation key, plus the secret key when `with_secret`.
    pub fn load_keys(&mut self, dir: &Path, with_secret: bool) -> Result<(), BackendError> {
        let dir = path_cstring(dir)?;
        // SAFETY: `dir` is a valid NUL-terminated string for the call.
        let code = unsafe { (self.api.load_keys)(self.session, dir.as_ptr(), with_secret as i32) };
        self.check("load_keys", code)?;
        self.refresh_ct_size()
    }

    fn gate(&mut self, kind: i32, a: u64, b: u64, c: u64) -> Result<Handle, BackendError> {
        let mut out = 0u64;
        // SAFETY: out-pointer is valid.
        let code = unsafe { (self.api.gate)(self.session, kind, a, b, c, &mut out) };
        self.check("gate", code)?;
        Ok(out)
    }

    /// Native multiplexer `s ? a : b`, exposed for adapter conformance checks.
    pub fn native_mux(&mut self, s: Handle, a: Handle, b: Handle) -> Result<Handle, BackendError> {
        self.gate(GATE_MUX, s, a, b)
    }
}

impl Drop for FheEngine {
    fn drop(&mut self) {
        // SAFETY: session was created by this table and is destroyed once.
        unsafe { (self.api.destroy)(self.session) }
    }
}

fn path_cstring(p: &Path) -> Result<CString, BackendError> {
    CString::new(p.to_string_lossy().into_owned())
        .map_err(|_| BackendError::Unavailable(format!("path {} contains NUL", p.display())))
}

impl Engine for FheEngine {
    fn kind(&self) -> BackendKind {
        BackendKind::Fhe
    }

    fn constant(&mut self, value: bool) -> Result<Handle, BackendError> {
        self.gate(GATE_CONST, value as u64, 0, 0)
    }

    fn binary(&mut self, gate: BinaryGate, a: Handle, b: Handle) -> Result<Handle, BackendError> {
        let kind = match gate {
            BinaryGate::Xor => GATE_XOR,
            BinaryGate::And => GATE_AND,
        };
        self.gate(kind, a, b, 0)
    }

    fn not(&mut self, a: Handle) -> Result<Handle, BackendError> {
        self.gate(GATE_NOT, a, 0, 0)
    }

    fn encrypt(&mut self, value: bool) -> Result<Handle, BackendError> {
        let mut out = 0u64;
        // SAFETY: out-pointer is valid.
        let code = unsafe { (self.api.encrypt_bit)(self.session, value as i32, &mut out) };
        self.check("encrypt_bit", code)?;
        Ok(out)
    }

    fn decrypt(&mut self, h: Handle) -> Result<bool, BackendError> {
        let mut out = 0i32;
        // SAFETY: out-pointer is valid.
        let code = unsafe { (self.api.decrypt_bit)(self.session, h, &mut out) };
        self.check("decrypt_bit", code)?;
        Ok(out != 0)
    }

    fn export(&self, h: Handle) -> Result<Vec<u8>, BackendError> {
        let mut buf = vec![0u8; self.ct_size];
        // SAFETY: buffer is valid for `cap` bytes.
        let code =
            unsafe { (self.api.export_bit)(self.session, h, buf.as_mut_ptr(), buf.len() as u64) };
        self.check("export_bit", code)?;
        Ok(buf)
    }

    fn import(&mut self, blob: &[u8]) -> Result<Handle, BackendError> {
        if blob.len() != self.ct_size {
            return Err(BackendError::MalformedCiphertext(format!(
                "expected {} bytes, got {}",
                self.ct_size,
                blob.len()
            )));
        }
        let mut out = 0u64;
        // SAFETY: blob is valid for `len` bytes; out-pointer is valid.
        let code = unsafe {
            (self.api.import_bit)(self.session, blob.as_ptr(), blob.len() as u64, &mut out)
        };
        self.check("import_bit", code)?;
        Ok(out)
    }

    fn ciphertext_size(&self) -> usize {
        self.ct_size
    }
}
