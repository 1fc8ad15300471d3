use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = ame::cli::run(std::env::args_os());
    if outcome.code == 0 {
        print!("{}", outcome.message);
    } else {
        eprint!("{}", outcome.message);
    }
    ExitCode::from(outcome.code as u8)
}
