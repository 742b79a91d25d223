//! Template-based answers to competency questions over the engine's state.

mod answer;
mod templates;

pub use answer::{answer_question, ask, Answer, AnswerStatus, QaState};
pub use templates::{inventory, parse_question, Category, CompetencyQuestion, Template, UnsupportedQuestion};
