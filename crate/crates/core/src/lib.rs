pub mod dsl;
pub mod htn;
pub mod instances;
pub mod kernel;
pub mod model;
pub mod solver;
mod trace;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/worlds.md")]
    mod worlds {}
    #[doc = include_str!("../../../book/src/language.md")]
    mod language {}
    #[doc = include_str!("../../../book/src/separation.md")]
    mod separation {}
    #[doc = include_str!("../../../book/src/communication.md")]
    mod communication {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
}
