//! Terminal play: numbered choices on stdout, choice numbers on stdin.

use std::io::{BufRead, Write};

use rhirl_core::engine::{apply_action, applicable_actions, initial_state, ActionInstance};
use rhirl_core::trace::{PlayerProfile, Trace, TraceSource};
use rhirl_core::WorldSpec;

use crate::error::{Result, WorkbenchError};
use crate::questionnaire::{normalize, QUESTIONS};

fn io_err(e: std::io::Error) -> WorkbenchError {
    WorkbenchError::io("<terminal>", e)
}

fn read_line(input: &mut impl BufRead) -> Result<Option<String>> {
    let mut line = String::new();
    let n = input.read_line(&mut line).map_err(io_err)?;
    Ok((n > 0).then(|| line.trim().to_string()))
}

/// Plays until an ending, `q`, or end of input, then asks the questionnaire
/// (a blank answer skips it). `clock` returns milliseconds since the start.
pub fn play(
    world: &WorldSpec,
    trace_id: &str,
    player_id: &str,
    input: &mut impl BufRead,
    output: &mut dyn Write,
    clock: &mut dyn FnMut() -> u64,
) -> Result<Trace> {
    let mut state = initial_state(world);
    let mut log: Vec<(ActionInstance, u64)> = Vec::new();
    writeln!(output, "{}", world.location(state.current_location()).text).map_err(io_err)?;
    loop {
        if state.is_terminal(world) {
            writeln!(output, "\n*** The End ***").map_err(io_err)?;
            break;
        }
        let actions = applicable_actions(world, &state);
        if actions.is_empty() {
            writeln!(output, "\nNothing more can be done.").map_err(io_err)?;
            break;
        }
        writeln!(output).map_err(io_err)?;
        for (i, a) in actions.iter().enumerate() {
            writeln!(output, "{:>3}. {}", i + 1, a.label(world)).map_err(io_err)?;
        }
        write!(output, "> ").map_err(io_err)?;
        output.flush().map_err(io_err)?;
        let Some(line) = read_line(input)? else { break };
        if line == "q" || line == "quit" {
            break;
        }
        let Some(action) = line.parse::<usize>().ok().and_then(|n| n.checked_sub(1)).and_then(|i| actions.get(i))
        else {
            writeln!(output, "Choose a number from 1 to {}, or q to stop.", actions.len()).map_err(io_err)?;
            continue;
        };
        let outcome = apply_action(world, &state, action)
            .map_err(|e| WorkbenchError::Runtime(format!("served choice was not applicable: {e}")))?;
        log.push((*action, clock()));
        writeln!(output, "{}", outcome.narration).map_err(io_err)?;
        state = outcome.next_state;
    }
    let profile = questionnaire(input, output)?;
    Ok(Trace::from_actions(
        world,
        trace_id.to_string(),
        player_id.to_string(),
        TraceSource::Human,
        profile,
        &log,
    )?)
}

fn questionnaire(input: &mut impl BufRead, output: &mut dyn Write) -> Result<Option<PlayerProfile>> {
    writeln!(output, "\nA few questions about you (1-5, blank to skip).").map_err(io_err)?;
    let mut answers = [0u8; 4];
    let mut i = 0;
    while i < QUESTIONS.len() {
        write!(output, "{}\n> ", QUESTIONS[i]).map_err(io_err)?;
        output.flush().map_err(io_err)?;
        let Some(line) = read_line(input)? else { return Ok(None) };
        if line.is_empty() {
            return Ok(None);
        }
        match line.parse::<u8>() {
            Ok(v) if (1..=5).contains(&v) => {
                answers[i] = v;
                i += 1;
            }
            _ => writeln!(output, "Please answer with a number from 1 to 5.").map_err(io_err)?,
        }
    }
    normalize(answers).map(Some).map_err(WorkbenchError::Invalid)
}
