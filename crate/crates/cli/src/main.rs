use clap::Parser;

fn main() {
    let cli = herglotz_cli::Cli::parse();
    let code = herglotz_cli::run(cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
