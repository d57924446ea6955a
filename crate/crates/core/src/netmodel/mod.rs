//! Radial feeder model and the direct load-flow matrices.
//!
//! States are ordered by a depth-first preorder traversal from the reference
//! bus with phases innermost: the state index of `(bus, phase)` is
//! `position(bus) * phase_count + phase`. Branch `k` is the upstream branch of
//! the bus at position `k`, so branch currents share the same ordering.
//!
//! Injected currents are load draws: a positive injection pulls current out of
//! the network, and bus voltages drop as `v = v_ref - DLF * i`.

mod flow;
mod network;
mod nodal;
mod perturb;

pub use flow::{build_flow_matrices, direct_power_flow, FlowMatrices};
pub use network::{Branch, Bus, BusId, RadialNetwork};
pub use nodal::{admittance_matrix, nodal_dlf, nodal_solve};
pub use perturb::perturb_rx_ratio;
