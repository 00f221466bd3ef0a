#include "qms/cli.hpp"

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "qms/document.hpp"
#include "qms/models.hpp"

namespace qms {

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kNumericalFailure = 2;
constexpr int kIoFailure = 3;

void emit(const Json& doc, const std::optional<std::string>& out_path,
          std::ostream& out) {
    if (out_path)
        save_json(*out_path, doc);
    else
        out << doc.dump(2) << "\n";
}

double parse_number(const std::string& text) {
    if (text.find('/') != std::string::npos) return to_double(parse_rational(text));
    size_t pos = 0;
    double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("bad numeric literal: " + text);
    return v;
}

std::vector<std::vector<double>> parse_matrix_arg(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(text);
    std::string row;
    while (std::getline(ss, row, ';')) {
        std::vector<double> cols;
        std::stringstream rs(row);
        std::string entry;
        while (std::getline(rs, entry, ',')) cols.push_back(parse_number(entry));
        rows.push_back(std::move(cols));
    }
    return rows;
}

Json report_shell(const std::string& command, const Json& input, bool timing) {
    Json rep = Json::object();
    rep["schema"] = "qms-report/1";
    rep["command"] = command;
    rep["input_digest"] = digest(input);
    (void)timing;
    return rep;
}

struct SegmentArgs {
    int first = 0;
    int last = 2;
};

int cmd_validate(const std::string& path, const std::optional<std::string>& out_path,
                 std::ostream& out, std::ostream& err) {
    Json input = load_json(path);
    InteractionSpec spec = spec_from_json(input);
    ValidationReport vr = validate_spec(spec);
    Json rep = report_shell("validate", input, false);
    rep["validation"] = validation_to_json(vr);
    emit(rep, out_path, out);
    if (!vr.ok()) {
        err << "validation failed with " << vr.issues.size() << " issue(s)\n";
        return kValidationFailure;
    }
    err << "document is valid\n";
    return kOk;
}

int cmd_build(const std::string& path, const SegmentArgs& seg_args, bool dense,
              bool block_path_only, const std::optional<std::string>& out_path,
              std::ostream& out, std::ostream& err) {
    Json input = load_json(path);
    InteractionSpec spec = spec_from_json(input);
    require_valid(spec);
    Segment seg = make_segment(seg_args.first, seg_args.last);
    Tolerances tol = Tolerances::defaults();
    if (!block_path_only && spec.segment_dim(seg) > tol.dense_dim_limit) {
        err << "dense dimension " << spec.segment_dim(seg)
            << " exceeds the limit; pass --block-path-only\n";
        return kValidationFailure;
    }

    SegmentContext ctx = segment_context(spec, seg, tol);
    SegmentState state(ctx, tol);
    Json rep = report_shell("build", input, false);
    rep["segment"] = Json::array({seg.first, seg.last});
    rep["bond_shift"] = ctx.boundary.bond_shift;
    rep["log_partition"] = ctx.boundary.log_z;

    Json paths = Json::array();
    for (const auto& pf : state.paths()) {
        Json p = Json::object();
        Json labels = Json::array();
        for (int t = 0; t < seg.num_sites(); ++t)
            labels.push_back(ctx.site(seg.first + t).sectors[pf.sectors[t]].label);
        p["labels"] = std::move(labels);
        p["weight"] = pf.weight;
        paths.push_back(std::move(p));
    }
    rep["path_weights"] = std::move(paths);

    if (dense && !block_path_only) {
        const Matrix& rho = state.dense_density();
        Json rows = Json::array();
        for (Eigen::Index i = 0; i < rho.rows(); ++i) {
            Json row = Json::array();
            for (Eigen::Index j = 0; j < rho.cols(); ++j)
                row.push_back(Json::array({rho(i, j).real(), rho(i, j).imag()}));
            rows.push_back(std::move(row));
        }
        rep["density"] = std::move(rows);
    }
    emit(rep, out_path, out);
    err << "built state on [" << seg.first << ", " << seg.last << "] with "
        << state.paths().size() << " sector paths\n";
    return kOk;
}

int cmd_diagonalize(const std::string& path, const SegmentArgs& seg_args,
                    const std::optional<std::string>& out_path, std::ostream& out,
                    std::ostream& err) {
    Json input = load_json(path);
    InteractionSpec spec = spec_from_json(input);
    require_valid(spec);
    Segment seg = make_segment(seg_args.first, seg_args.last);
    Tolerances tol = Tolerances::defaults();
    DiagonalizationRun run = run_diagonalization(spec, seg, {}, tol);

    Json rep = report_shell("diagonalize", input, false);
    rep["segment"] = Json::array({seg.first, seg.last});
    rep["diagonalization"] = diagonalization_to_json(run, spec);
    emit(rep, out_path, out);

    bool pass = run.basis_residual <= tol.simdiag_residual &&
                run.restriction_deviation <= tol.expectation &&
                run.invariance_deviation <= tol.expectation &&
                run.theorem_deviation <= tol.expectation &&
                run.certification_deviation <= tol.expectation &&
                run.markov_deviation <= tol.markov;
    if (run.commuting_square_deviation)
        pass = pass && *run.commuting_square_deviation <= tol.expectation;
    err << (pass ? "diagonalization checks passed\n"
                 : "diagonalization checks exceeded tolerance\n");
    return pass ? kOk : kNumericalFailure;
}

int cmd_classify(const std::string& path, const ClassifyOptions& opts,
                 const std::optional<std::string>& out_path, std::ostream& out,
                 std::ostream& err) {
    Json input = load_json(path);
    InteractionSpec spec = spec_from_json(input);
    require_valid(spec);
    FactorClassification fc = classify(spec, opts);
    Json rep = report_shell("classify", input, false);
    rep["classification"] = classification_to_json(fc);
    emit(rep, out_path, out);
    switch (fc.verdict) {
        case FactorVerdict::Tracial:
            err << "tracial state; the lattice criterion does not apply\n";
            break;
        case FactorVerdict::TypeIIILambdaCandidate:
            err << "type III_lambda candidate, lambda = " << fc.lambda
                << (fc.stabilized ? " (stabilized)" : " (not stabilized)") << "\n";
            break;
        case FactorVerdict::IndeterminateIrrational:
            err << "indeterminate: irrational ratio witness " << *fc.witness << "\n";
            break;
    }
    return kOk;
}

int cmd_gen(const std::string& variant, double j1, double j2,
            const std::string& j1_text, const std::string& j2_text, bool exact,
            const std::string& matrix_text, std::uint64_t seed, int period,
            int max_dim, bool lifting, const std::string& pool,
            const std::optional<std::string>& out_path, std::ostream& out,
            std::ostream& err) {
    InteractionSpec spec;
    if (variant == "ising") {
        if (exact) {
            spec = gen_ising_exact(parse_rational(j1_text), parse_rational(j2_text));
        } else {
            spec = gen_ising(j1, j2);
        }
    } else if (variant == "markov") {
        spec = gen_markov_lifting(parse_matrix_arg(matrix_text));
    } else if (variant == "random") {
        RandomSpecParams params;
        params.seed = seed;
        params.period = period;
        params.max_site_dim = max_dim;
        params.lifting = lifting;
        params.pool = pool == "ln2" ? EigenvaluePool::Ln2 : EigenvaluePool::Mixed;
        spec = gen_random(params);
    } else {
        err << "unknown generator variant: " << variant << "\n";
        return kValidationFailure;
    }
    emit(spec_to_json(spec), out_path, out);
    err << "generated " << variant << " document\n";
    return kOk;
}

int cmd_report(const std::string& path, const SegmentArgs& seg_args,
               const ClassifyOptions& copts, const std::optional<std::string>& out_path,
               std::ostream& out, std::ostream& err) {
    Json input = load_json(path);
    InteractionSpec spec = spec_from_json(input);
    Tolerances tol = Tolerances::defaults();
    Json rep = report_shell("report", input, false);

    ValidationReport vr = validate_spec(spec, tol);
    rep["validation"] = validation_to_json(vr);
    if (!vr.ok()) {
        emit(rep, out_path, out);
        err << "validation failed\n";
        return kValidationFailure;
    }

    Segment seg = make_segment(seg_args.first, seg_args.last);
    bool pass = true;

    SegmentHamiltonian ham = assemble_operators(spec, seg);
    double comm = verify_commutation(ham);
    rep["commutation"] = Json::object({{"max_relative_norm", comm}});
    pass = pass && comm <= tol.commutation;

    if (spec.periodic) {
        StationaryBoundaries sb = stationary_boundaries(spec, tol);
        double worst = 0.0;
        for (int len = 3; len <= 4; ++len) {
            Segment small = make_segment(seg.first, seg.first + len - 1);
            Segment big = make_segment(seg.first, seg.first + len);
            if (spec.segment_dim(big) > tol.dense_dim_limit) continue;
            SegmentState lo(segment_context(spec, small, sb, tol), tol);
            SegmentState hi(segment_context(spec, big, sb, tol), tol);
            Matrix reduced =
                trace_out_last_site(hi.dense_density(), hi.context().site_dims());
            worst = std::max(worst,
                             (reduced - lo.dense_density()).cwiseAbs().maxCoeff());
        }
        rep["projectivity"] = Json::object({{"residual", worst},
                                            {"bond_shift", sb.bond_shift}});
        pass = pass && worst <= tol.projectivity;
    }

    DiagonalizationRun run = run_diagonalization(spec, seg, {}, tol);
    rep["diagonalization"] = diagonalization_to_json(run, spec);
    pass = pass && run.basis_residual <= tol.simdiag_residual &&
           run.restriction_deviation <= tol.expectation &&
           run.invariance_deviation <= tol.expectation &&
           run.theorem_deviation <= tol.expectation &&
           run.certification_deviation <= tol.expectation &&
           run.markov_deviation <= tol.markov;
    if (run.commuting_square_deviation)
        pass = pass && *run.commuting_square_deviation <= tol.expectation;

    if (spec.periodic) {
        FactorClassification fc = classify(spec, copts, tol);
        rep["classification"] = classification_to_json(fc);
    }

    emit(rep, out_path, out);
    err << (pass ? "all checks passed\n" : "numerical checks exceeded tolerance\n");
    return pass ? kOk : kNumericalFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
    CLI::App app{"non-homogeneous quantum Markov chain states: build, "
                 "diagonalize and classify"};
    app.require_subcommand(1);

    std::string path;
    std::optional<std::string> out_path;
    SegmentArgs seg;
    ClassifyOptions copts;
    bool dense = false;
    bool block_path_only = false;

    auto add_segment = [&](CLI::App* cmd) {
        cmd->add_option("--segment", [&seg](const std::vector<std::string>& vals) {
               if (vals.size() != 2) return false;
               seg.first = std::stoi(vals[0]);
               seg.last = std::stoi(vals[1]);
               return true;
           },
           "first and last site of the segment")
            ->expected(2);
    };

    CLI::App* validate = app.add_subcommand("validate", "check a document");
    validate->add_option("path", path)->required();
    validate->add_option("--out", out_path);

    CLI::App* build = app.add_subcommand("build", "assemble a segment state");
    build->add_option("path", path)->required();
    add_segment(build);
    build->add_flag("--dense", dense, "include the dense density in the output");
    build->add_flag("--block-path-only", block_path_only,
                    "skip every dense-representation step");
    build->add_option("--out", out_path);

    CLI::App* diag = app.add_subcommand("diagonalize", "run the diagonal reduction");
    diag->add_option("path", path)->required();
    add_segment(diag);
    diag->add_option("--out", out_path);

    CLI::App* cls = app.add_subcommand("classify", "factor type from the spectrum");
    cls->add_option("path", path)->required();
    cls->add_option("--max-n", copts.max_windows, "stabilization windows");
    cls->add_option("--max-denom", copts.max_denominator,
                    "continued-fraction denominator bound");
    cls->add_option("--tol", copts.tolerance, "ratio acceptance tolerance");
    cls->add_option("--out", out_path);

    std::string variant;
    std::string j1_text = "1", j2_text = "1", matrix_text;
    double j1 = 1.0, j2 = 1.0;
    bool exact = false;
    std::uint64_t seed = 1;
    int period = 0, max_dim = 4;
    bool lifting = false;
    std::string pool = "mixed";

    CLI::App* gen = app.add_subcommand("gen", "generate model documents");
    gen->add_option("variant", variant, "ising | markov | random")->required();
    gen->add_option("--j1", j1_text, "first coupling (rational or decimal)");
    gen->add_option("--j2", j2_text, "second coupling (rational or decimal)");
    gen->add_flag("--exact", exact, "attach exact eigenvalue bookkeeping");
    gen->add_option("--matrix", matrix_text,
                    "row-stochastic matrix, rows ; separated, entries , separated");
    gen->add_option("--seed", seed);
    gen->add_option("--period", period);
    gen->add_option("--max-dim", max_dim);
    gen->add_flag("--lifting", lifting, "rotate bases and site embeddings");
    gen->add_option("--pool", pool, "ln2 | mixed eigenvalue pool");
    gen->add_option("--out", out_path);

    CLI::App* report = app.add_subcommand("report", "run the full pipeline");
    report->add_option("path", path)->required();
    add_segment(report);
    report->add_option("--max-n", copts.max_windows);
    report->add_option("--max-denom", copts.max_denominator);
    report->add_option("--tol", copts.tolerance);
    report->add_option("--out", out_path);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kOk;
        }
        err << e.what() << "\n";
        return kValidationFailure;
    }

    try {
        if (validate->parsed()) return cmd_validate(path, out_path, out, err);
        if (build->parsed())
            return cmd_build(path, seg, dense, block_path_only, out_path, out, err);
        if (diag->parsed()) return cmd_diagonalize(path, seg, out_path, out, err);
        if (cls->parsed()) return cmd_classify(path, copts, out_path, out, err);
        if (gen->parsed())
            return cmd_gen(variant, j1, j2, j1_text, j2_text, exact, matrix_text,
                           seed, period, max_dim, lifting, pool, out_path, out, err);
        if (report->parsed()) return cmd_report(path, seg, copts, out_path, out, err);
    } catch (const DocumentError& e) {
        err << "document error: " << e.what() << "\n";
        return kValidationFailure;
    } catch (const nlohmann::json::exception& e) {
        err << "parse error: " << e.what() << "\n";
        return kIoFailure;
    } catch (const std::ios_base::failure& e) {
        err << "io error: " << e.what() << "\n";
        return kIoFailure;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << "\n";
        return kValidationFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kNumericalFailure;
    }
    return kValidationFailure;
}

}  // namespace qms
