//! Guide chapters compiled as doc-tests.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/counterfactuals.md")]
pub mod counterfactuals {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/proxies.md")]
pub mod proxies {}

#[doc = include_str!("../../../book/src/audit.md")]
pub mod audit {}
