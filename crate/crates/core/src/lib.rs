pub mod depot;
pub mod harness;
pub mod model;
pub mod solver;
pub mod trajectory;
pub mod twin;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/scenario.md")]
    mod scenario {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/assignment.md")]
    mod assignment {}
    #[doc = include_str!("../../../book/src/depot.md")]
    mod depot {}
    #[doc = include_str!("../../../book/src/prediction_error.md")]
    mod prediction_error {}
    #[doc = include_str!("../../../book/src/maneuvers.md")]
    mod maneuvers {}
}
