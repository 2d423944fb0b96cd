//! The four-item player questionnaire. Answers are on a 1 to 5 scale and are
//! min-max normalised with `(x − 1) / 4`.

use rhirl_core::trace::PlayerProfile;

pub const QUESTIONS: [&str; 4] = [
    "How familiar are you with interactive fiction? (1 = never played, 5 = very familiar)",
    "How much do you play video games? (1 = never, 5 = daily)",
    "How much do you enjoy exploring everything before moving on? (1 = not at all, 5 = a lot)",
    "When stuck, how long do you keep trying before giving up? (1 = not long, 5 = until solved)",
];

pub fn normalize(answers: [u8; 4]) -> Result<PlayerProfile, String> {
    if let Some(bad) = answers.iter().find(|a| !(1..=5).contains(*a)) {
        return Err(format!("answers must be between 1 and 5, got {bad}"));
    }
    let [a, b, c, d] = answers.map(|x| f64::from(x - 1) / 4.0);
    Ok(PlayerProfile {
        familiarity: a,
        gaming_experience: b,
        preference_explore: c,
        persistence: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_endpoints_and_midpoint() {
        let p = normalize([1, 5, 3, 2]).unwrap();
        assert_eq!(p.values(), [0.0, 1.0, 0.5, 0.25]);
        assert_eq!(p.binarize(), [0, 1, 1, 0]);
        assert!(normalize([0, 1, 1, 1]).is_err());
        assert!(normalize([1, 1, 1, 6]).is_err());
    }
}
