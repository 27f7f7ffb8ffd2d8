//! Shared identifier types used across the pipeline.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Discrete simulation time, in slot units.
pub type Slot = u32;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Identifies one recruitable device (UAV or UGV).
    DeviceId
);
id_type!(
    /// Identifies one task.
    TaskId
);
id_type!(
    /// Identifies one base station.
    StationId
);
