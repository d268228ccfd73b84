#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod continuation;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod grid;
pub mod inertia;
pub mod nonlinearity;
pub mod operator;
pub mod params;
pub mod picone;
mod quadrature;
pub mod spectrum;
pub mod verify;
