use chrono::{DateTime, Utc};

use super::model::{Quiz, QuizResult, ResultEntry};
use super::QuizError;
use crate::text::normalize_answer;

/// Grades by exact match after [`normalize_answer`] on both sides. No model
/// is involved, and every flag starts cleared.
pub fn grade_quiz(quiz: &Quiz, answers: &[String]) -> Result<QuizResult, QuizError> {
    grade_quiz_at(quiz, answers, Utc::now())
}

pub fn grade_quiz_at(
    quiz: &Quiz,
    answers: &[String],
    completed_at: DateTime<Utc>,
) -> Result<QuizResult, QuizError> {
    if answers.len() != quiz.questions.len() {
        return Err(QuizError::LengthMismatch {
            expected: quiz.questions.len(),
            got: answers.len(),
        });
    }
    let entries = quiz
        .questions
        .iter()
        .zip(answers)
        .map(|(q, answer)| ResultEntry {
            user_answer: answer.clone(),
            is_correct: normalize_answer(answer) == normalize_answer(&q.correct_answer),
            flagged: false,
        })
        .collect();
    Ok(QuizResult {
        quiz_id: quiz.quiz_id.clone(),
        entries,
        completed_at,
    })
}

/// A quiz being taken: ungraded until answers are submitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuizSession {
    pub quiz: Quiz,
    pub result: Option<QuizResult>,
}

impl QuizSession {
    pub fn new(quiz: Quiz) -> Self {
        Self { quiz, result: None }
    }

    /// Grading again replaces the previous result, clearing flags.
    pub fn grade(&mut self, answers: &[String]) -> Result<&QuizResult, QuizError> {
        let result = grade_quiz(&self.quiz, answers)?;
        Ok(self.result.insert(result))
    }

    pub fn flag(&mut self, index: usize, flagged: bool) -> Result<&QuizResult, QuizError> {
        flag_question(self, index, flagged)
    }
}

/// Records a learner's flag on one question. Correctness is untouched.
pub fn flag_question(
    session: &mut QuizSession,
    index: usize,
    flagged: bool,
) -> Result<&QuizResult, QuizError> {
    let result = session.result.as_mut().ok_or(QuizError::NotGraded)?;
    let len = result.entries.len();
    let entry = result
        .entries
        .get_mut(index)
        .ok_or(QuizError::IndexOutOfRange { index, len })?;
    entry.flagged = flagged;
    Ok(result)
}
