#include <iostream>

#include <CLI11.hpp>

#include "qcbvp/cli.hpp"

namespace cli = qcbvp::cli;

namespace {

struct Flags {
    std::string input, out, report = "text";
    std::optional<double> tol;
    std::optional<int> modes, grid;
    std::optional<std::uint64_t> seed;
};

int solve(const std::string& kind, const Flags& f) {
    auto spec = cli::parse_problem(f.input, kind);
    auto& n = spec.numerics;
    if (f.tol) n.residual_tol = *f.tol;
    if (f.modes) n.fourier_modes = *f.modes;
    if (f.grid) n.grid_size = *f.grid;
    if (f.seed) n.seed = *f.seed;
    cli::validate(n);
    const auto R = cli::run(spec);
    if (!f.out.empty()) cli::write_outputs(R, f.out);
    if (f.report == "json") std::cout << R.report.dump(2) << "\n";
    else std::cout << cli::text_summary(R);
    return R.pass ? cli::exit_pass : cli::exit_failure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qcbvp: Riemann-Hilbert and oblique derivative problems for Beltrami equations"};
    app.require_subcommand(1);
    Flags f;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"solve-hilbert", "hilbert"},   {"solve-dirichlet", "dirichlet"}, {"solve-neumann", "neumann"},
        {"solve-directional", "directional"}, {"solve-poincare", "poincare"}, {"capacity", "capacity"},
        {"qhb-check", "qhb"},           {"a-condition", "a-condition"}};
    std::string chosen;
    for (const auto& [name, kind] : commands) {
        auto* sub = app.add_subcommand(name, "run a '" + kind + "' problem file");
        sub->add_option("--input", f.input, "problem JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", f.out, "output directory");
        sub->add_option("--tol", f.tol, "residual tolerance for the verdict");
        sub->add_option("--modes", f.modes, "Fourier modes (power of two)");
        sub->add_option("--grid", f.grid, "Beltrami grid size (power of two)");
        sub->add_option("--seed", f.seed, "sampling seed");
        sub->add_option("--report", f.report, "stdout format")->check(CLI::IsMember({"json", "text"}));
        sub->callback([&chosen, k = kind] { chosen = k; });
    }
    std::string fixture;
    auto* fx = app.add_subcommand("fixtures", "write built-in problem files");
    fx->add_option("name", fixture, "unit-disk | three-disks | constant-mu | matrix")->required();
    fx->add_option("--out", f.out, "output directory")->required();
    fx->callback([&chosen] { chosen = "fixtures"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::exit_input;
    }
    try {
        if (chosen == "fixtures") {
            for (const auto& p : cli::write_fixture(fixture, f.out)) std::cout << p.string() << "\n";
            return cli::exit_pass;
        }
        return solve(chosen, f);
    } catch (const qcbvp::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return cli::exit_input;
    } catch (const qcbvp::Error& e) {
        std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
        return cli::exit_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_failure;
    }
}
