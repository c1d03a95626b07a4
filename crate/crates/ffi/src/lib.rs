//! C ABI for the `sigsoftmax` crate.
//!
//! - Opaque handles (`SsmActivation`, `SsmRankReport`, `SsmLanguage`) are
//!   created by `*_new` / constructor functions and released with `*_free`.
//! - Fallible functions return an `SsmStatus`; zero is success. The message
//!   for the last failure on the calling thread is available from
//!   `ssm_last_error()`.
//! - Matrices cross the boundary as row-major `double` buffers.
//! - Strings returned by `*_json` functions are freed with `ssm_string_free`.
//!
//! The header `include/sigsoftmax.h` is regenerated by `build.rs` on every build.
//!
//! ```c
//! #include "sigsoftmax.h"
//!
//! SsmActivation *act = NULL;
//! double z[3] = {1.0, 2.0, 0.0}, p[3];
//! if (ssm_activation_new(SSM_KIND_SIGSOFTMAX, 0.0, &act) == SSM_STATUS_OK) {
//!     ssm_forward(act, z, 3, p);
//!     ssm_activation_free(act);
//! }
//! ```

mod activation;
mod analysis;
mod error;

pub use activation::*;
pub use analysis::*;
pub use error::*;
