pub mod body;
pub mod emotionml;
pub mod face;
pub mod fixtures;
pub mod keyvalue;
pub mod platform;
pub mod session;
pub mod stomp;
pub mod voice;
