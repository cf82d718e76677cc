//! One-degree-of-freedom templates and their feedback laws.

pub mod attitude;
pub mod foreaft;
pub mod vertical;

pub use attitude::{graph_error_accel, AttitudeParams};
pub use foreaft::ForeAftParams;
pub use vertical::{VerticalHopper, VerticalParams};
