/*
 * Flat C interface of the native FHE adapter (libocwc_tfhe).
 *
 * The adapter evaluates single gates on library-managed ciphertexts and
 * holds no algorithm logic. All handles are opaque 64-bit integers that are
 * valid only inside the session that created them and are never reused
 * within a session. Functions returning int return 0 on success and a
 * nonzero code otherwise; ocwc_fhe_last_error then describes the failure.
 *
 * One session per thread of use. Sessions must not share handles.
 */
#ifndef OCWC_FHE_H
#define OCWC_FHE_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum ocwc_fhe_gate_kind {
    OCWC_FHE_GATE_XOR = 0,   /* out = a ^ b */
    OCWC_FHE_GATE_AND = 1,   /* out = a & b */
    OCWC_FHE_GATE_NOT = 2,   /* out = !a */
    OCWC_FHE_GATE_CONST = 3, /* out = trivial encryption of (a != 0) */
    OCWC_FHE_GATE_MUX = 4    /* out = a ? b : c */
};

/* Returns 0 when no session could be created. */
uint64_t ocwc_fhe_create_session(void);

/* Generates a fresh secret key and evaluation (cloud) key. */
int ocwc_fhe_keygen(uint64_t session, uint64_t seed);

/* Writes secret.key and eval.key into dir in the library's native format. */
int ocwc_fhe_save_keys(uint64_t session, const char *dir);

/* Loads eval.key, and secret.key when with_secret is nonzero. */
int ocwc_fhe_load_keys(uint64_t session, const char *dir, int with_secret);

/* Requires the secret key. */
int ocwc_fhe_encrypt_bit(uint64_t session, int bit, uint64_t *out);

/* Operands that a gate kind does not use are ignored. */
int ocwc_fhe_gate(uint64_t session, int kind, uint64_t a, uint64_t b, uint64_t c, uint64_t *out);

/* Requires the secret key. Decrypting under a foreign key yields an
 * unspecified bit but must not crash. */
int ocwc_fhe_decrypt_bit(uint64_t session, uint64_t handle, int *out);

/* Size in bytes of one serialized ciphertext under the loaded parameters. */
int ocwc_fhe_ciphertext_size(uint64_t session, uint64_t *out);

/* cap must be at least the ciphertext size. */
int ocwc_fhe_export_bit(uint64_t session, uint64_t handle, uint8_t *buf, uint64_t cap);

int ocwc_fhe_import_bit(uint64_t session, const uint8_t *buf, uint64_t len, uint64_t *out);

/* Copies the last error message (NUL-terminated, truncated to cap) and
 * returns its full length. */
int ocwc_fhe_last_error(uint64_t session, char *buf, uint64_t cap);

/* Releases the session and every handle it owns. */
void ocwc_fhe_destroy(uint64_t session);

#ifdef __cplusplus
}
#endif

#endif /* OCWC_FHE_H */
