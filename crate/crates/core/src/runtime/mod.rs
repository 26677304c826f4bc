//! Fitting with frozen weights, model files, shader export and slice
//! rendering.

pub mod fit;
pub mod interp;
pub mod model_file;
pub mod shader;
pub mod slice;

pub use fit::{edit_params, fit_analytical_proxy, fit_material, fit_material_from, FitConfig, FitResult};
pub use model_file::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use slice::{render_slice, slice_image, square_to_hemisphere, Image, SliceMode};
pub use interp::{Precision, ShaderProgram};
pub use shader::{export_shader, shader_source, SHADER_ENTRY};
