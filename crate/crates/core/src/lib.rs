#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boltzmann_modes;
pub mod cache;
pub mod config;
pub mod cross_sections;
pub mod error;
pub mod experiments;
pub mod fft3;
pub mod grazing_fpl_modes;
pub mod grid;
pub mod quadrature;
pub mod spectral_core;
pub mod special;
