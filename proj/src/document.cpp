#include "qms/document.hpp"

#include <fstream>
#include <set>

namespace qms {

namespace {

void check_keys(const Json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw DocumentError(path, "expected an object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw DocumentError(path + "." + key, "unknown field");
}

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& doc, const std::string& path) {
    if (!doc.is_array() || doc.empty())
        throw DocumentError(path, "expected a non-empty array of rows");
    const size_t rows = doc.size();
    size_t cols = 0;
    Matrix m;
    for (size_t i = 0; i < rows; ++i) {
        const Json& row = doc[i];
        if (!row.is_array()) throw DocumentError(path, "expected an array row");
        if (i == 0) {
            cols = row.size();
            m = Matrix::Zero(rows, cols);
        } else if (row.size() != cols) {
            throw DocumentError(path, "ragged matrix");
        }
        for (size_t j = 0; j < cols; ++j) {
            const Json& entry = row[j];
            if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() ||
                !entry[1].is_number())
                throw DocumentError(path, "complex entries must be [re, im] pairs");
            m(i, j) = Complex(entry[0].get<double>(), entry[1].get<double>());
        }
    }
    return m;
}

Json bond_block_to_json(const BondBlock& blk) {
    Json out = Json::object();
    out["matrix"] = matrix_to_json(blk.h);
    if (blk.exact_eigs) {
        Json eigs = Json::array();
        for (const auto& r : *blk.exact_eigs) eigs.push_back(format_rational(r));
        out["eigenvalues"] = std::move(eigs);
    }
    return out;
}

// exact_unit converts "p/q" eigenvalue payloads into physical values
// (multiples of the log base).
BondBlock bond_block_from_json(const Json& doc, const std::string& path,
                               double exact_unit) {
    check_keys(doc, path, {"matrix", "eigenvalues", "basis"});
    BondBlock blk;
    std::vector<Rational> exact;
    bool all_exact = !doc.contains("eigenvalues") ? false : true;
    Eigen::VectorXd values;
    if (doc.contains("eigenvalues")) {
        const Json& eigs = doc["eigenvalues"];
        if (!eigs.is_array() || eigs.empty())
            throw DocumentError(path + ".eigenvalues", "expected a non-empty array");
        const int d = static_cast<int>(eigs.size());
        values.resize(d);
        for (int i = 0; i < d; ++i) {
            const Json& e = eigs[i];
            if (e.is_string()) {
                Rational r = parse_rational(e.get<std::string>());
                exact.push_back(r);
                values(i) = to_double(r) * exact_unit;
            } else if (e.is_number()) {
                values(i) = e.get<double>();
                all_exact = false;
            } else {
                throw DocumentError(path + ".eigenvalues",
                                    "entries must be numbers or \"p/q\" strings");
            }
        }
    }

    if (doc.contains("matrix")) {
        if (doc.contains("basis"))
            throw DocumentError(path, "matrix and basis are mutually exclusive");
        blk.h = matrix_from_json(doc["matrix"], path + ".matrix");
        if (all_exact && static_cast<Eigen::Index>(exact.size()) == blk.h.rows())
            blk.exact_eigs = std::move(exact);
    } else if (doc.contains("eigenvalues")) {
        const int d = static_cast<int>(values.size());
        Matrix basis = identity(d);
        if (doc.contains("basis")) basis = matrix_from_json(doc["basis"], path + ".basis");
        if (basis.rows() != d)
            throw DocumentError(path + ".basis", "shape mismatch with eigenvalues");
        blk.h = basis * values.cast<Complex>().asDiagonal() * basis.adjoint();
        if (all_exact) blk.exact_eigs = std::move(exact);
    } else {
        throw DocumentError(path, "a block needs either matrix or eigenvalues");
    }
    return blk;
}

}  // namespace

Json spec_to_json(const InteractionSpec& spec) {
    Json doc = Json::object();
    doc["schema"] = "qms-spec/1";
    Json mode = Json::object();
    if (spec.mode == NumericMode::Float) {
        mode["kind"] = "float";
    } else {
        mode["kind"] = "rational-log";
        mode["base"] = spec.base.is_natural ? "e" : format_rational(spec.base.base);
    }
    doc["mode"] = std::move(mode);
    Json chain = Json::object();
    if (spec.periodic) {
        chain["kind"] = "periodic";
        chain["period"] = spec.period;
    } else {
        chain["kind"] = "finite";
        chain["first_site"] = spec.first_site;
    }
    doc["chain"] = std::move(chain);
    if (spec.seed) doc["seed"] = *spec.seed;

    Json sites = Json::array();
    for (const auto& site : spec.sites) {
        Json s = Json::object();
        s["dim"] = site.dim;
        Json blocks = Json::array();
        for (size_t b = 0; b < site.sectors.size(); ++b) {
            Json blk = Json::object();
            blk["label"] = site.sectors[b].label;
            blk["n"] = site.sectors[b].n;
            blk["nbar"] = site.sectors[b].nbar;
            blk["h"] = matrix_to_json(site.h[b]);
            blk["hbar"] = matrix_to_json(site.hbar[b]);
            blocks.push_back(std::move(blk));
        }
        s["blocks"] = std::move(blocks);
        if (site.embedding.size() != 0) s["embedding"] = matrix_to_json(site.embedding);
        sites.push_back(std::move(s));
    }
    doc["sites"] = std::move(sites);

    Json bonds = Json::array();
    for (const auto& bond : spec.bonds) {
        Json rows = Json::array();
        for (const auto& row : bond.block) {
            Json cols = Json::array();
            for (const auto& blk : row) cols.push_back(bond_block_to_json(blk));
            rows.push_back(std::move(cols));
        }
        Json b = Json::object();
        b["blocks"] = std::move(rows);
        bonds.push_back(std::move(b));
    }
    doc["bonds"] = std::move(bonds);
    return doc;
}

InteractionSpec spec_from_json(const Json& doc) {
    check_keys(doc, "$", {"schema", "mode", "chain", "seed", "sites", "bonds"});
    if (!doc.contains("schema") || doc["schema"] != "qms-spec/1")
        throw DocumentError("$.schema", "expected \"qms-spec/1\"");

    InteractionSpec spec;
    if (doc.contains("mode")) {
        const Json& mode = doc["mode"];
        check_keys(mode, "$.mode", {"kind", "base"});
        const std::string kind = mode.value("kind", "float");
        if (kind == "float") {
            spec.mode = NumericMode::Float;
        } else if (kind == "rational-log") {
            spec.mode = NumericMode::RationalLog;
            if (mode.contains("base")) {
                const Json& base = mode["base"];
                if (!base.is_string())
                    throw DocumentError("$.mode.base", "expected \"e\" or \"p/q\"");
                const std::string text = base.get<std::string>();
                if (text == "e") {
                    spec.base.is_natural = true;
                } else {
                    spec.base.is_natural = false;
                    spec.base.base = parse_rational(text);
                    if (spec.base.base <= Rational(1))
                        throw DocumentError("$.mode.base", "base must exceed 1");
                }
            }
        } else {
            throw DocumentError("$.mode.kind", "expected float or rational-log");
        }
    }

    if (!doc.contains("chain")) throw DocumentError("$.chain", "missing");
    const Json& chain = doc["chain"];
    check_keys(chain, "$.chain", {"kind", "period", "first_site"});
    const std::string kind = chain.value("kind", "");
    if (kind == "periodic") {
        spec.periodic = true;
        if (!chain.contains("period") || !chain["period"].is_number_integer())
            throw DocumentError("$.chain.period", "missing integer period");
        spec.period = chain["period"].get<int>();
    } else if (kind == "finite") {
        spec.periodic = false;
        spec.first_site = chain.value("first_site", 0);
    } else {
        throw DocumentError("$.chain.kind", "expected periodic or finite");
    }

    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned())
            throw DocumentError("$.seed", "expected an unsigned integer");
        spec.seed = doc["seed"].get<std::uint64_t>();
    }

    if (!doc.contains("sites") || !doc["sites"].is_array())
        throw DocumentError("$.sites", "expected an array");
    size_t si = 0;
    for (const Json& s : doc["sites"]) {
        const std::string sp = "$.sites[" + std::to_string(si++) + "]";
        check_keys(s, sp, {"dim", "blocks", "embedding"});
        SiteBlocks site;
        if (!s.contains("dim") || !s["dim"].is_number_integer())
            throw DocumentError(sp + ".dim", "missing integer dimension");
        site.dim = s["dim"].get<int>();
        if (!s.contains("blocks") || !s["blocks"].is_array())
            throw DocumentError(sp + ".blocks", "expected an array");
        size_t bi = 0;
        for (const Json& b : s["blocks"]) {
            const std::string bp = sp + ".blocks[" + std::to_string(bi++) + "]";
            check_keys(b, bp, {"label", "n", "nbar", "h", "hbar"});
            SiteBlocks::Sector sec;
            if (!b.contains("label") || !b["label"].is_string())
                throw DocumentError(bp + ".label", "missing string label");
            sec.label = b["label"].get<std::string>();
            sec.n = b.value("n", 1);
            sec.nbar = b.value("nbar", 1);
            site.sectors.push_back(sec);
            site.h.push_back(b.contains("h") ? matrix_from_json(b["h"], bp + ".h")
                                             : Matrix::Zero(sec.n, sec.n));
            site.hbar.push_back(b.contains("hbar")
                                    ? matrix_from_json(b["hbar"], bp + ".hbar")
                                    : Matrix::Zero(sec.nbar, sec.nbar));
        }
        if (s.contains("embedding"))
            site.embedding = matrix_from_json(s["embedding"], sp + ".embedding");
        spec.sites.push_back(std::move(site));
    }

    if (!doc.contains("bonds") || !doc["bonds"].is_array())
        throw DocumentError("$.bonds", "expected an array");
    size_t bi = 0;
    for (const Json& b : doc["bonds"]) {
        const std::string bp = "$.bonds[" + std::to_string(bi++) + "]";
        check_keys(b, bp, {"blocks"});
        if (!b.contains("blocks") || !b["blocks"].is_array())
            throw DocumentError(bp + ".blocks", "expected an array of rows");
        BondBlocks bond;
        const double unit =
            spec.mode == NumericMode::RationalLog ? spec.base.log_value() : 1.0;
        size_t sl = 0;
        for (const Json& row : b["blocks"]) {
            const std::string rp = bp + ".blocks[" + std::to_string(sl++) + "]";
            if (!row.is_array()) throw DocumentError(rp, "expected an array");
            std::vector<BondBlock> cols;
            size_t sr = 0;
            for (const Json& blk : row)
                cols.push_back(bond_block_from_json(
                    blk, rp + "[" + std::to_string(sr++) + "]", unit));
            bond.block.push_back(std::move(cols));
        }
        spec.bonds.push_back(std::move(bond));
    }
    return spec;
}

InteractionSpec load_spec(const std::string& path) {
    return spec_from_json(load_json(path));
}

Json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open " + path);
    Json doc;
    in >> doc;
    return doc;
}

void save_json(const std::string& path, const Json& doc) {
    std::ofstream out(path);
    if (!out) throw std::ios_base::failure("cannot open " + path + " for writing");
    out << doc.dump(2) << "\n";
}

std::string digest(const Json& doc) {
    const std::string text = doc.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a:") + buf;
}

Json validation_to_json(const ValidationReport& rep) {
    Json out = Json::object();
    out["ok"] = rep.ok();
    Json issues = Json::array();
    for (const auto& issue : rep.issues) {
        Json i = Json::object();
        i["path"] = issue.path;
        i["message"] = issue.message;
        issues.push_back(std::move(i));
    }
    out["issues"] = std::move(issues);
    return out;
}

Json classification_to_json(const FactorClassification& fc) {
    Json out = Json::object();
    switch (fc.verdict) {
        case FactorVerdict::Tracial:
            out["verdict"] = "tracial";
            break;
        case FactorVerdict::TypeIIILambdaCandidate:
            out["verdict"] = "type-III-lambda-candidate";
            break;
        case FactorVerdict::IndeterminateIrrational:
            out["verdict"] = "indeterminate-irrational";
            break;
    }
    if (fc.verdict == FactorVerdict::TypeIIILambdaCandidate) {
        out["lambda"] = fc.lambda;
        out["generator"] = fc.generator;
        if (fc.exact_generator)
            out["generator_exact"] = format_rational(*fc.exact_generator);
        out["stabilized"] = fc.stabilized;
        out["window_generators"] = fc.window_generators;
        out["alpha"] = fc.alpha.alpha;
        out["best_alpha"] = fc.alpha.best_alpha;
    }
    if (fc.witness) out["witness"] = *fc.witness;
    out["notes"] = fc.notes;
    return out;
}

Json chain_to_json(const ClassicalMarkovChain& chain, const InteractionSpec& spec,
                   const Segment& seg) {
    Json out = Json::object();
    out["segment"] = Json::array({seg.first, seg.last});
    Json initial = Json::array();
    for (double w : chain.initial) initial.push_back(w);
    out["initial"] = std::move(initial);
    Json trans = Json::array();
    for (const auto& t : chain.transitions) {
        Json rows = Json::array();
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            Json row = Json::array();
            for (Eigen::Index j = 0; j < t.cols(); ++j) row.push_back(t(i, j));
            rows.push_back(std::move(row));
        }
        trans.push_back(std::move(rows));
    }
    out["transitions"] = std::move(trans);
    Json states = Json::array();
    for (size_t t = 0; t < chain.states.size(); ++t) {
        Json list = Json::array();
        const auto& left = spec.site(seg.first + static_cast<int>(t));
        const auto& right = spec.site(seg.first + static_cast<int>(t) + 1);
        for (const auto& st : chain.states[t]) {
            Json s = Json::object();
            s["left"] = left.sectors[st.sl].label;
            s["right"] = right.sectors[st.sr].label;
            s["level"] = st.idx;
            list.push_back(std::move(s));
        }
        states.push_back(std::move(list));
    }
    out["refined_states"] = std::move(states);
    out["total_mass"] = chain.total_mass;
    return out;
}

Json diagonalization_to_json(const DiagonalizationRun& run,
                             const InteractionSpec& spec) {
    Json out = Json::object();
    out["basis_residual"] = run.basis_residual;
    out["restriction_deviation"] = run.restriction_deviation;
    out["invariance_deviation"] = run.invariance_deviation;
    out["theorem_deviation"] = run.theorem_deviation;
    out["measure_certification_deviation"] = run.certification_deviation;
    out["markov_deviation"] = run.markov_deviation;
    if (run.commuting_square_deviation)
        out["commuting_square_deviation"] = *run.commuting_square_deviation;
    Json boundary = Json::object();
    boundary["left"] = run.boundaries.left_k;
    boundary["right"] = run.boundaries.right_k;
    out["boundary_terms"] = std::move(boundary);
    out["chain"] = chain_to_json(run.chain, spec, run.data.ctx.segment);
    return out;
}

}  // namespace qms
