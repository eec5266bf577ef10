pub mod spin_oracle;
pub mod spin_toy;
