pub mod explain;
pub mod gen_data;
pub mod pipeline;
pub mod render;
