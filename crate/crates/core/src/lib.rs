pub mod algebra;
pub mod fredholm;
pub mod laurent;
pub mod numkit;
