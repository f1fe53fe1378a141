//! Command-and-control stack for simulated autonomous underwater vehicles:
//! survey mission simulation, an acoustic channel model, a
//! communication-relay node and a natural-language C2 service.

pub mod acoustic;
pub mod c2;
pub mod dialogue;
pub mod domain;
pub mod relay;
pub mod sim;
