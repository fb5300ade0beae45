//! Cost-optimal allocation of crowdsourced live-stream transcoding and
//! delivery across geo-distributed cloud regions.

pub mod forecast;
pub mod model;
pub mod num;
pub mod optimizer;
pub mod pricing;
pub mod allocator;
pub mod defaults;
pub mod workload;
pub mod harness;
pub mod io;

pub type CloudModelF64 = pricing::CloudModel<f64>;
pub type CloudModelF32 = pricing::CloudModel<f32>;
pub type PriceBookF64 = pricing::PriceBook<f64>;
pub type PriceBookF32 = pricing::PriceBook<f32>;
pub type RttMatrixF64 = model::RttMatrix<f64>;
pub type RttMatrixF32 = model::RttMatrix<f32>;
pub type QualityLadderF64 = model::QualityLadder<f64>;
pub type QualityLadderF32 = model::QualityLadder<f32>;
pub type OptimizerConfigF64 = optimizer::OptimizerConfig<f64>;
pub type OptimizerConfigF32 = optimizer::OptimizerConfig<f32>;
pub type SlotSolutionF64 = optimizer::SlotSolution<f64>;
pub type SlotSolutionF32 = optimizer::SlotSolution<f32>;
pub type AllocatorConfigF64 = allocator::AllocatorConfig<f64>;
pub type AllocatorConfigF32 = allocator::AllocatorConfig<f32>;
pub type SlotMetricsF64 = allocator::SlotMetrics<f64>;
pub type SlotMetricsF32 = allocator::SlotMetrics<f32>;
