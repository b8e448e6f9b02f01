fn main() {
    std::process::exit(champ_outcome::cli::run(std::env::args_os()));
}
