pub mod certfile;
pub mod error;
pub mod graph;
pub mod lp;
pub mod model;
pub mod mp_cert;
pub mod product;
pub mod query;
pub mod reach_cert;
pub mod value;
pub mod witness;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/queries.md")]
    mod queries {}
    #[doc = include_str!("../../../book/src/product.md")]
    mod product {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/mean-payoff.md")]
    mod mean_payoff {}
    #[doc = include_str!("../../../book/src/subsystems.md")]
    mod subsystems {}
    #[doc = include_str!("../../../book/src/schedulers.md")]
    mod schedulers {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
