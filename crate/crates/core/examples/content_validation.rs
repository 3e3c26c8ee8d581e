//! Scores survey results for candidate stimuli with the chance-corrected
//! measure and reports which are usable.

use affectplay::session::{content_report, validate_content};

const SURVEY: &str = "stimulus_id,correct,n,k
happy_face_01,52,60,6
sad_voice_03,36,60,6
proud_body_02,12,60,6
bored_face_07,20,60,6
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = validate_content(SURVEY.as_bytes())?;
    print!("{}", content_report(&rows));
    Ok(())
}
