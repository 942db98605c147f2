//! Subcommand argument structs and their computations.

pub mod classical;
pub mod ensemble;
pub mod quantum;
pub mod spectral;

/// Sets an unset option to its default.
pub(crate) fn set<T>(slot: &mut Option<T>, default: T) {
    if slot.is_none() {
        *slot = Some(default);
    }
}

/// Value of an option that `fill` has set.
pub(crate) fn filled<T: Clone>(slot: &Option<T>) -> T {
    slot.clone().expect("option filled before exec")
}
