// factorgibbs: command line front end for the factor-of-Gibbs toolkit.
//
// Subcommands: check-mixing, classify, spectrum, gibbs, push, psi,
// variations, schedule, verify, pipeline.  Every run echoes its full
// configuration into the report, and repeated runs with the same
// configuration and seed produce byte-identical output.
//
// Exit codes: 0 success, 1 input error, 2 property not found (or not
// certifiable within the given caps), 3 pipeline stage failure.

#include <factorgibbs/cones.hpp>
#include <factorgibbs/factor_ops.hpp>
#include <factorgibbs/io.hpp>
#include <factorgibbs/potential.hpp>
#include <factorgibbs/psi.hpp>
#include <factorgibbs/rng.hpp>
#include <factorgibbs/schedule.hpp>
#include <factorgibbs/sft.hpp>
#include <factorgibbs/transfer.hpp>
#include <factorgibbs/version.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fg = factorgibbs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNotFound = 2;
constexpr int kExitStage = 3;

struct Opts {
    std::string system_path;
    std::string potential_path;
    std::string out_path;
    std::string format = "json";
    std::string ref = "eigenmeasure";
    std::string source = "bowen";
    double sigma = 0.5;
    double eps = 1e-3;
    double theta = 0.5;
    double coeff = 1.0;
    int depth = -1; // -1: per-command default
    int cap = -1;   // -1: per-command default
    int j_max = 8;
    int k_max = 12;
    int n_sup = 4;
    std::uint64_t seed = 12345;
};

int default_to(int v, int dflt) { return v > 0 ? v : dflt; }

fg::ordered_json options_echo(const Opts& o) {
    fg::ordered_json j;
    j["system"] = o.system_path;
    j["potential"] = o.potential_path;
    j["sigma"] = o.sigma;
    j["eps"] = o.eps;
    j["depth"] = o.depth;
    j["cap"] = o.cap;
    j["seed"] = o.seed;
    j["out"] = o.out_path;
    j["format"] = o.format;
    j["ref"] = o.ref;
    j["source"] = o.source;
    j["theta"] = o.theta;
    j["coeff"] = o.coeff;
    j["jmax"] = o.j_max;
    j["kmax"] = o.k_max;
    j["nsup"] = o.n_sup;
    return j;
}

fg::ordered_json envelope(const std::string& command, const Opts& o) {
    fg::ordered_json j = fg::result_envelope(command);
    j["options"] = options_echo(o);
    return j;
}

struct Loaded {
    fg::SystemInput sys;
    fg::Potential phi;
};

fg::SystemInput load_system_file(const Opts& o) {
    if (o.system_path.empty()) throw fg::ParseError("--system is required");
    return fg::load_system(fg::load_json_file(o.system_path));
}

Loaded load_inputs(const Opts& o) {
    fg::SystemInput sys = load_system_file(o);
    if (o.potential_path.empty()) throw fg::ParseError("--potential is required");
    fg::Potential phi =
        fg::load_potential(sys.sft, sys.symbol_names, fg::load_json_file(o.potential_path));
    return {std::move(sys), std::move(phi)};
}

fg::Reference reference_from(const Opts& o) {
    if (o.ref == "eigenmeasure") return fg::Reference::Eigenmeasure;
    if (o.ref == "gibbs") return fg::Reference::Gibbs;
    throw fg::ParseError("--ref must be 'eigenmeasure' or 'gibbs'");
}

fg::AlphaSource alpha_from(const Opts& o) {
    if (o.source == "bowen") return fg::AlphaSource::bowen();
    if (o.source == "walters") return fg::AlphaSource::walters(o.n_sup);
    if (o.source == "holder") return fg::AlphaSource::holder(o.theta, o.coeff);
    throw fg::ParseError("--source must be 'bowen', 'walters' or 'holder'");
}

void emit_text(const Opts& o, const std::string& text) {
    if (o.out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(o.out_path, std::ios::binary);
    if (!out) throw fg::ParseError("cannot write " + o.out_path);
    out << text;
}

void emit_json(const Opts& o, const fg::ordered_json& j) { emit_text(o, j.dump(2) + "\n"); }

std::string csv_text(const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream os;
    fg::write_csv(os, header, rows);
    return os.str();
}

void require_json_format(const Opts& o) {
    if (o.format != "json")
        throw fg::ParseError("this subcommand only supports --format json");
}

fg::ordered_json eigendata_json(const fg::TransferOperator& op, const fg::EigenData& e,
                                const std::vector<std::string>& names) {
    fg::ordered_json j;
    j["depth"] = e.depth;
    j["rho"] = e.rho;
    j["pressure"] = e.pressure;
    j["residual_h"] = e.residual_h;
    j["residual_nu"] = e.residual_nu;
    j["iterations_h"] = e.iterations_h;
    j["iterations_nu"] = e.iterations_nu;
    fg::ordered_json words = fg::ordered_json::array();
    for (const fg::Word& w : op.words().words()) words.push_back(fg::format_word(w, names));
    j["words"] = words;
    j["nu"] = fg::vector_json(e.nu);
    j["h"] = fg::vector_json(e.h);
    return j;
}

fg::ordered_json mixing_json(const fg::SystemInput& si, int n_max) {
    fg::MixingResult top = fg::is_topologically_mixing(si.sft);
    fg::FiberMixingResult fib = fg::fiber_mixing_exponent(si.sft, si.fmap, n_max);
    fg::ordered_json j;
    j["topological"] = {{"mixing", top.mixing}, {"exponent", top.exponent}};
    fg::ordered_json f;
    f["mixing"] = fib.found;
    f["exponent"] = fib.exponent;
    f["probe_cap"] = n_max;
    fg::ordered_json fails = fg::ordered_json::array();
    for (const fg::FiberWitness& w : fib.failures) {
        fg::ordered_json e;
        e["level"] = w.level;
        e["image_word"] = fg::format_word(w.image_word, si.image_names);
        e["start_symbol"] = w.start_symbol >= 0
                                ? fg::ordered_json(si.symbol_names[w.start_symbol])
                                : fg::ordered_json(nullptr);
        e["end_symbol"] = w.end_symbol >= 0 ? fg::ordered_json(si.symbol_names[w.end_symbol])
                                            : fg::ordered_json(nullptr);
        fails.push_back(std::move(e));
    }
    f["failure_witnesses"] = fails;
    j["fiber"] = f;
    j["both_verified"] = top.mixing && fib.found;
    return j;
}

fg::ordered_json schedule_json(const fg::ConeSchedule& s) {
    fg::ordered_json j;
    j["sigma"] = s.sigma;
    j["K"] = s.K;
    j["B"] = s.B;
    j["n_fiber"] = s.n_fiber;
    j["j_max"] = s.j_max;
    j["k_max"] = s.k_max;
    fg::ordered_json n = fg::ordered_json::array();
    for (std::size_t i = 1; i < s.n.size(); ++i) n.push_back(s.n[i]);
    j["n"] = n;
    fg::ordered_json th = fg::ordered_json::array();
    for (int k = 1; k <= s.j_max; ++k) th.push_back(s.threshold(k));
    j["thresholds"] = th;
    fg::ordered_json d = fg::ordered_json::array();
    for (const auto& row : s.d) {
        fg::ordered_json r = fg::ordered_json::array();
        for (int k = 0; k <= s.k_max && k < static_cast<int>(row.size()); ++k)
            r.push_back(row[static_cast<std::size_t>(k)]);
        d.push_back(std::move(r));
    }
    j["d"] = d;
    j["recurrence_residual"] = fg::verify_recurrence(s);
    fg::BoundCheck bc = fg::uniform_bound_check(s);
    j["uniform_bound"] = {{"max_entry", bc.max_entry}, {"bound", bc.bound}, {"pass", bc.pass}};
    if (s.has_contraction()) {
        j["contraction"] = {{"C", s.C},
                            {"D", s.D},
                            {"gamma", s.gamma},
                            {"fiber_exponent", s.fiber_exponent_used},
                            {"op_log_norm", s.op_log_norm},
                            {"phi_sup", s.phi_sup}};
        fg::ordered_json cert = fg::ordered_json::array();
        for (int k = 1; k <= s.j_max; ++k) cert.push_back(s.certified(k));
        j["certified"] = cert;
    } else {
        j["contraction"] = nullptr;
    }
    return j;
}

std::string class_name(fg::RegularityReport::Class c) {
    switch (c) {
    case fg::RegularityReport::Class::Holder: return "holder";
    case fg::RegularityReport::Class::Walters: return "walters";
    case fg::RegularityReport::Class::Bowen: return "bowen";
    default: return "unclassified";
    }
}

// ── subcommand handlers ─────────────────────────────────────────────────────

int cmd_check_mixing(const Opts& o) {
    require_json_format(o);
    fg::SystemInput si = load_system_file(o);
    fg::ordered_json j = envelope("check-mixing", o);
    fg::ordered_json m = mixing_json(si, default_to(o.cap, 12));
    bool ok = m["both_verified"].get<bool>();
    j["result"] = std::move(m);
    emit_json(o, j);
    return ok ? kExitOk : kExitNotFound;
}

int cmd_classify(const Opts& o) {
    require_json_format(o);
    Loaded in = load_inputs(o);
    fg::ClassifyParams p;
    p.n_max = default_to(o.depth, p.n_max);
    p.len_cap = default_to(o.cap, p.len_cap);
    p.walters_n_sup = o.n_sup;
    fg::RegularityReport r = fg::classify(in.phi, p);
    fg::ordered_json j = envelope("classify", o);
    fg::ordered_json res;
    res["class"] = class_name(r.cls);
    res["holder_pass"] = r.holder_pass;
    res["walters_pass"] = r.walters_pass;
    res["bowen_pass"] = r.bowen_pass;
    res["holder_theta"] = r.holder_theta;
    res["holder_coeff"] = r.holder_coeff;
    res["fit_residual"] = r.fit_residual;
    res["var_phi"] = r.var_phi;
    res["walters_tail"] = r.walters_tail;
    res["bowen"] = {{"K", r.bowen.K},
                    {"plateau", r.bowen.plateau},
                    {"plateaued", r.bowen.plateaued},
                    {"sequence", r.bowen.sequence}};
    res["note"] = fg::RegularityReport::kEvidenceNote;
    j["result"] = std::move(res);
    emit_json(o, j);
    return kExitOk;
}

int cmd_spectrum(const Opts& o) {
    require_json_format(o);
    Loaded in = load_inputs(o);
    int depth = default_to(o.depth, fg::working_depth(in.phi));
    fg::TransferOperator op(in.phi, depth);
    fg::EigenData e = fg::eigendata(op);
    fg::ordered_json j = envelope("spectrum", o);
    j["result"] = eigendata_json(op, e, in.sys.symbol_names);
    emit_json(o, j);
    return kExitOk;
}

int cmd_gibbs(const Opts& o) {
    Loaded in = load_inputs(o);
    int depth = default_to(o.depth, std::max(in.phi.max_depth(), 1));
    int bound_cap = default_to(o.cap, 6);
    fg::TransferOperator op(in.phi, fg::working_depth(in.phi));
    fg::EigenData e = fg::eigendata(op);
    std::vector<std::vector<std::string>> rows;
    fg::ordered_json table = fg::ordered_json::array();
    for (const fg::Word& w : fg::enumerate_words(in.phi.sft(), depth)) {
        double mu = fg::gibbs_cylinder(op, e, w);
        double nu = fg::eigenmeasure_cylinder(op, e, w);
        std::string name = fg::format_word(w, in.sys.symbol_names);
        rows.push_back({name, fg::format_double(mu), fg::format_double(nu)});
        table.push_back({{"word", name}, {"mu", mu}, {"nu", nu}});
    }
    if (o.format == "csv") {
        emit_text(o, csv_text({"word", "mu", "nu"}, rows));
        return kExitOk;
    }
    require_json_format(o);
    fg::GibbsBounds gb = fg::gibbs_bounds_check(op, e, bound_cap);
    fg::ordered_json j = envelope("gibbs", o);
    j["result"] = {{"depth", depth},
                   {"pressure", e.pressure},
                   {"cylinders", std::move(table)},
                   {"bounds",
                    {{"constant", gb.constant},
                     {"min_ratio", gb.min_ratio},
                     {"max_ratio", gb.max_ratio},
                     {"depth_checked", bound_cap},
                     {"worst_word", fg::format_word(gb.worst, in.sys.symbol_names)}}}};
    emit_json(o, j);
    return kExitOk;
}

int cmd_push(const Opts& o) {
    Loaded in = load_inputs(o);
    fg::Reference ref = reference_from(o);
    fg::FactorSystem sys(in.phi, in.sys.fmap);
    int depth = default_to(o.depth, 4);
    std::vector<std::vector<std::string>> rows;
    fg::ordered_json table = fg::ordered_json::array();
    for (int len = 1; len <= depth; ++len) {
        for (const fg::Word& w : fg::image_words(sys.sft(), sys.fmap(), len)) {
            fg::PushValue a = fg::pushforward_operator(sys, w, ref);
            fg::PushValue b = fg::pushforward_liftsum(sys, w, ref);
            double diff = std::abs(a.value - b.value);
            std::string name = fg::format_word(w, in.sys.image_names);
            rows.push_back({name, fg::format_double(a.value), fg::format_double(b.value),
                            fg::format_double(diff)});
            table.push_back({{"image_word", name},
                             {"value_operator_path", a.value},
                             {"value_liftsum_path", b.value},
                             {"abs_diff", diff}});
        }
    }
    if (o.format == "csv") {
        emit_text(o, csv_text({"image_word", "value_operator_path", "value_liftsum_path",
                               "abs_diff"},
                              rows));
        return kExitOk;
    }
    require_json_format(o);
    fg::ordered_json j = envelope("push", o);
    j["result"] = {{"depth", depth}, {"reference", o.ref}, {"rows", std::move(table)}};
    emit_json(o, j);
    return kExitOk;
}

// Builds the schedule for a fibered run: n_fiber from the fiber exponent,
// contraction constants attached.
fg::ConeSchedule fibered_schedule(const fg::FactorSystem& sys, const Opts& o) {
    int probe = default_to(o.cap, 12);
    int n_fiber = sys.fiber_exponent(probe); // throws CapacityError when absent
    fg::ConeSchedule s = fg::build_schedule(sys.potential(), alpha_from(o), o.sigma, o.j_max,
                                            o.k_max, n_fiber);
    fg::attach_diameter_constants(s, sys, probe);
    return s;
}

int cmd_psi(const Opts& o) {
    Loaded in = load_inputs(o);
    fg::PsiOptions popt;
    popt.ref = reference_from(o);
    fg::FactorSystem sys(in.phi, in.sys.fmap);
    fg::ConeSchedule s = fibered_schedule(sys, o);
    int depth = default_to(o.depth, 1);
    std::vector<std::vector<std::string>> rows;
    fg::ordered_json table = fg::ordered_json::array();
    for (const fg::Word& w : fg::image_words(sys.sft(), sys.fmap(), depth)) {
        fg::PsiEstimate est = fg::estimate_psi_best(sys, s, w, o.eps, popt);
        std::string name = fg::format_word(w, in.sys.image_names);
        rows.push_back({name, std::to_string(est.m_used), fg::format_double(est.value),
                        fg::format_double(est.certified_error)});
        table.push_back({{"image_word", name},
                         {"m", est.m_used},
                         {"f_m", est.value},
                         {"certified_error", est.certified_error},
                         {"met_target", est.met_target},
                         {"k_used", est.k_used}});
    }
    if (o.format == "csv") {
        emit_text(o, csv_text({"image_word", "m", "f_m", "certified_error"}, rows));
        return kExitOk;
    }
    require_json_format(o);
    fg::ordered_json j = envelope("psi", o);
    j["result"] = {{"depth", depth},
                   {"reference", o.ref},
                   {"eps", o.eps},
                   {"schedule", schedule_json(s)},
                   {"rows", std::move(table)}};
    emit_json(o, j);
    return kExitOk;
}

int cmd_variations(const Opts& o) {
    Loaded in = load_inputs(o);
    fg::PsiOptions popt;
    popt.ref = reference_from(o);
    fg::FactorSystem sys(in.phi, in.sys.fmap);
    fg::ConeSchedule s = fibered_schedule(sys, o);
    int n_hi = default_to(o.depth, 2);
    std::vector<int> n_list, j_list;
    for (int n = 1; n <= n_hi; ++n) n_list.push_back(n);
    for (int j = 0; j <= 3; ++j) j_list.push_back(j);
    int len_cap = std::max(n_hi + 3 + 1, n_hi + 2) + 2;
    std::vector<fg::PsiVariationRow> table =
        fg::psi_variations(sys, s, n_list, j_list, len_cap, popt);
    std::vector<std::vector<std::string>> rows;
    fg::ordered_json jt = fg::ordered_json::array();
    for (const fg::PsiVariationRow& r : table) {
        rows.push_back({std::to_string(r.n), std::to_string(r.j), fg::format_double(r.measured),
                        fg::format_double(r.theory_bound), fg::format_double(r.uncertainty),
                        std::to_string(r.groups)});
        jt.push_back({{"n", r.n},
                      {"j", r.j},
                      {"measured", r.measured},
                      {"theory_bound", r.theory_bound},
                      {"uncertainty", r.uncertainty},
                      {"groups", r.groups},
                      {"covered", r.covered},
                      {"covered_j", r.covered_j}});
    }
    if (o.format == "csv") {
        emit_text(o, csv_text({"n", "j", "measured", "theory_bound", "uncertainty", "groups"},
                              rows));
        return kExitOk;
    }
    require_json_format(o);
    fg::ordered_json j = envelope("variations", o);
    j["result"] = {{"len_cap", len_cap}, {"reference", o.ref}, {"rows", std::move(jt)}};
    emit_json(o, j);
    return kExitOk;
}

int cmd_schedule(const Opts& o) {
    require_json_format(o);
    Loaded in = load_inputs(o);
    fg::FactorSystem sys(in.phi, in.sys.fmap);
    fg::ConeSchedule s = fibered_schedule(sys, o);
    fg::ordered_json j = envelope("schedule", o);
    j["result"] = schedule_json(s);
    emit_json(o, j);
    return kExitOk;
}

int cmd_verify(const Opts& o) {
    require_json_format(o);
    Loaded in = load_inputs(o);
    fg::FactorSystem sys(in.phi, in.sys.fmap);
    const fg::EigenData& e = sys.eig();
    int cap = default_to(o.cap, 6);
    fg::ordered_json checks = fg::ordered_json::array();
    bool all = true;
    auto add = [&](const std::string& name, bool pass, fg::ordered_json detail) {
        detail["name"] = name;
        detail["pass"] = pass;
        fg::ordered_json r;
        r["name"] = name;
        r["pass"] = pass;
        for (auto it = detail.begin(); it != detail.end(); ++it)
            if (it.key() != "name" && it.key() != "pass") r[it.key()] = it.value();
        checks.push_back(std::move(r));
        all = all && pass;
    };

    // eigen residuals of the transfer operator
    add("eigen_residual", e.residual_h <= 1e-9 && e.residual_nu <= 1e-9,
        {{"residual_h", e.residual_h}, {"residual_nu", e.residual_nu}});

    // block operators reassemble the full matrix exactly
    {
        const int b = sys.fmap().image_alphabet_size();
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(sys.op().matrix().rows(),
                                                    sys.op().matrix().cols());
        for (int i = 0; i < b; ++i)
            for (int k = 0; k < b; ++k) sum += sys.block_operator(i, k).mat;
        double diff = (sum - sys.op().matrix()).cwiseAbs().maxCoeff();
        add("block_reassembly", diff == 0.0, {{"max_abs_diff", diff}});
    }

    // operator path and lift-sum path agree on short image cylinders
    {
        double worst = 0;
        int checked = 0;
        for (int len = 1; len <= std::min(cap, 8); ++len)
            for (const fg::Word& w : fg::image_words(sys.sft(), sys.fmap(), len))
                for (fg::Reference ref : {fg::Reference::Eigenmeasure, fg::Reference::Gibbs}) {
                    double a = fg::pushforward_operator(sys, w, ref).value;
                    double b = fg::pushforward_liftsum(sys, w, ref).value;
                    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
                    ++checked;
                }
        add("pairing_identity", worst <= 1e-12, {{"max_rel_diff", worst}, {"words", checked}});
    }

    // cylinder partitions: right-extension sums for both references,
    // left-extension sums for the shift-invariant one
    {
        double worst = 0;
        for (int len = 1; len <= std::min(cap, 5); ++len)
            for (const fg::Word& w : fg::image_words(sys.sft(), sys.fmap(), len)) {
                for (fg::Reference ref : {fg::Reference::Eigenmeasure, fg::Reference::Gibbs}) {
                    double whole = fg::pushforward_operator(sys, w, ref).value;
                    double right = 0;
                    for (int b = 0; b < sys.fmap().image_alphabet_size(); ++b) {
                        fg::Word wb = w;
                        wb.push_back(b);
                        right += fg::pushforward_operator(sys, wb, ref).value;
                    }
                    worst = std::max(worst, std::abs(right - whole));
                }
                double whole = fg::pushforward_operator(sys, w, fg::Reference::Gibbs).value;
                double left = 0;
                for (int b = 0; b < sys.fmap().image_alphabet_size(); ++b) {
                    fg::Word bw;
                    bw.push_back(b);
                    bw.insert(bw.end(), w.begin(), w.end());
                    left += fg::pushforward_operator(sys, bw, fg::Reference::Gibbs).value;
                }
                worst = std::max(worst, std::abs(left - whole));
            }
        add("marginal_consistency", worst <= 1e-12, {{"max_abs_diff", worst}});
    }

    fg::ConeSchedule s = fibered_schedule(sys, o);

    {
        double r = fg::verify_recurrence(s);
        add("schedule_recurrence", r <= 1e-12, {{"max_residual", r}});
    }
    {
        fg::BoundCheck bc = fg::uniform_bound_check(s);
        add("uniform_bound", bc.pass, {{"max_entry", bc.max_entry}, {"bound", bc.bound}});
    }
    {
        bool ok = true;
        for (int i = 1; i <= s.j_max; ++i)
            ok = ok && s.n[static_cast<std::size_t>(i)] >= s.n_fiber;
        add("threshold_floor", ok, {{"n_fiber", s.n_fiber}});
    }

    // sampled cone mapping at the first few schedule rows
    {
        int violations = 0, samples = 0;
        for (int j = 0; j < std::min(2, s.j_max); ++j) {
            int need = s.n[static_cast<std::size_t>(j + 1)] + 1;
            fg::Word w = fg::image_words(sys.sft(), sys.fmap(), need).front();
            fg::MappingCheck mc = fg::cone_mapping_check(sys, s, j, w, 50, o.seed + j);
            violations += mc.violations;
            samples += mc.samples;
        }
        add("cone_mapping", violations == 0, {{"samples", samples}, {"violations", violations}});
    }

    // sampled endpoint contraction through two schedule blocks
    if (s.j_max >= 2) {
        int need = 1 + s.n[1] + s.n[2];
        fg::Word w = fg::image_words(sys.sft(), sys.fmap(), need).front();
        fg::ContractionCheck cc = fg::empirical_contraction(sys, s, w, 0, 2, 20, o.seed);
        add("empirical_contraction", cc.violations == 0,
            {{"samples", cc.samples},
             {"violations", cc.violations},
             {"gamma_pow", cc.gamma_pow},
             {"max_ratio", cc.max_ratio}});
    }

    // induced family normalizes: sum_b e^{f(b.w)} = 1 for the invariant
    // reference
    {
        fg::PsiOptions popt;
        popt.ref = fg::Reference::Gibbs;
        double worst = 0;
        for (const fg::Word& w : fg::image_words(sys.sft(), sys.fmap(), std::min(cap, 4)))
            worst = std::max(worst, std::abs(fg::psi_exp_sum(sys, w, popt) - 1.0));
        add("g_sum", worst <= 1e-9, {{"max_abs_dev", worst}});
    }

    // telescoping of Birkhoff sums of the estimates
    {
        fg::Word w = fg::image_words(sys.sft(), sys.fmap(), 1).front();
        fg::BirkhoffPsi bp = fg::birkhoff_sum_psi(sys, s, w, 2, std::min(cap + 3, 9));
        add("birkhoff_telescoping", bp.mismatch <= 1e-10,
            {{"n", bp.n}, {"m", bp.m}, {"mismatch", bp.mismatch}});
    }

    // measured two-sided Gibbs property of the base measure
    {
        fg::GibbsBounds gb = fg::gibbs_bounds_check(sys.op(), e, std::min(cap, 6));
        bool ok = std::isfinite(gb.constant) && gb.min_ratio > 0;
        add("gibbs_bounds", ok, {{"constant", gb.constant}});
    }

    fg::ordered_json j = envelope("verify", o);
    j["result"] = {{"pass", all}, {"checks", std::move(checks)}};
    emit_json(o, j);
    return all ? kExitOk : kExitNotFound;
}

// ── pipeline ────────────────────────────────────────────────────────────────

fg::ordered_json potential_json(const fg::Potential& phi,
                                const std::vector<std::string>& names) {
    fg::ordered_json layers = fg::ordered_json::array();
    for (const fg::PotentialLayer& layer : phi.layers()) {
        fg::ordered_json vals = fg::ordered_json::array();
        for (double v : layer.values) vals.push_back(v);
        layers.push_back({{"depth", layer.depth}, {"values", std::move(vals)}});
    }
    fg::ordered_json j;
    j["alphabet"] = names;
    j["layers"] = std::move(layers);
    return j;
}

int cmd_pipeline(const Opts& o) {
    require_json_format(o);
    if (o.out_path.empty()) throw fg::ParseError("pipeline requires --out DIR");
    Loaded in = load_inputs(o);
    std::filesystem::create_directories(o.out_path);
    auto path = [&](const std::string& leaf) {
        return (std::filesystem::path(o.out_path) / leaf).string();
    };
    auto write_file = [&](const std::string& leaf, const std::string& text) {
        std::ofstream f(path(leaf), std::ios::binary);
        if (!f) throw fg::ParseError("cannot write " + path(leaf));
        f << text;
    };

    fg::ordered_json manifest = envelope("pipeline", o);
    fg::ordered_json stages = fg::ordered_json::array();
    std::vector<std::string> artifacts;
    std::string current;
    auto stage_done = [&](const std::string& name) {
        stages.push_back({{"name", name}, {"ok", true}});
        std::cout << "stage " << name << " ok\n";
    };

    try {
        // 1. eigendata of the loaded potential
        current = "eigendata";
        fg::TransferOperator op0(in.phi, fg::working_depth(in.phi));
        fg::EigenData e0 = fg::eigendata(op0);
        {
            fg::ordered_json j;
            j["result"] = eigendata_json(op0, e0, in.sys.symbol_names);
            write_file("spectrum.json", j.dump(2) + "\n");
            artifacts.push_back("spectrum.json");
        }
        stage_done(current);

        // 2. normalize: remove the pressure so later stages work at log-scale
        // zero; eigenvectors and variations are unchanged
        current = "normalize";
        fg::Potential phin = fg::normalize(in.phi, e0);
        fg::FactorSystem sys(phin, in.sys.fmap);
        {
            fg::ordered_json j = potential_json(phin, in.sys.symbol_names);
            write_file("normalized_potential.json", j.dump(2) + "\n");
            artifacts.push_back("normalized_potential.json");
            if (std::abs(sys.eig().pressure) > 1e-9)
                throw fg::NumericError("normalized pressure not zero");
        }
        stage_done(current);

        // 3. fiber-mixing certificate
        current = "fiber";
        int probe = default_to(o.cap, 12);
        fg::ordered_json mj = mixing_json(in.sys, probe);
        write_file("mixing.json", mj.dump(2) + "\n");
        artifacts.push_back("mixing.json");
        if (!mj["both_verified"].get<bool>())
            throw fg::CapacityError("fiber mixing not established within the probe cap");
        int n_fiber = mj["fiber"]["exponent"].get<int>();
        stage_done(current);

        // 4. schedule with contraction constants
        current = "schedule";
        fg::ConeSchedule s =
            fg::build_schedule(phin, alpha_from(o), o.sigma, o.j_max, o.k_max, n_fiber);
        fg::attach_diameter_constants(s, sys, probe);
        write_file("schedule.json", schedule_json(s).dump(2) + "\n");
        artifacts.push_back("schedule.json");
        stage_done(current);

        // 5. psi table; when eps is below the constructed depth the stage
        // reports the deepest certified error instead of aborting
        current = "psi";
        {
            fg::PsiOptions popt; // eigenmeasure of the normalized potential
            int depth = default_to(o.depth, 1);
            std::vector<std::vector<std::string>> rows;
            fg::ordered_json table = fg::ordered_json::array();
            for (const fg::Word& w : fg::image_words(sys.sft(), sys.fmap(), depth)) {
                fg::PsiEstimate est = fg::estimate_psi_best(sys, s, w, o.eps, popt);
                std::string name = fg::format_word(w, in.sys.image_names);
                rows.push_back({name, std::to_string(est.m_used), fg::format_double(est.value),
                                fg::format_double(est.certified_error)});
                table.push_back({{"image_word", name},
                                 {"m", est.m_used},
                                 {"f_m", est.value},
                                 {"certified_error", est.certified_error},
                                 {"met_target", est.met_target}});
            }
            write_file("psi_table.csv",
                       csv_text({"image_word", "m", "f_m", "certified_error"}, rows));
            artifacts.push_back("psi_table.csv");
            fg::ordered_json j;
            j["eps"] = o.eps;
            j["covered_range_note"] =
                "certified_error reflects the deepest constructed contraction step";
            j["rows"] = std::move(table);
            write_file("psi_table.json", j.dump(2) + "\n");
            artifacts.push_back("psi_table.json");
        }
        stage_done(current);

        // 6. variation table of the induced potential
        current = "variations";
        {
            fg::PsiOptions popt;
            std::vector<int> n_list{1, 2}, j_list{0, 1, 2};
            int len_cap = 8;
            std::vector<fg::PsiVariationRow> table =
                fg::psi_variations(sys, s, n_list, j_list, len_cap, popt);
            std::vector<std::vector<std::string>> rows;
            fg::ordered_json jt = fg::ordered_json::array();
            for (const fg::PsiVariationRow& r : table) {
                rows.push_back({std::to_string(r.n), std::to_string(r.j),
                                fg::format_double(r.measured), fg::format_double(r.theory_bound),
                                fg::format_double(r.uncertainty), std::to_string(r.groups)});
                jt.push_back({{"n", r.n},
                              {"j", r.j},
                              {"measured", r.measured},
                              {"theory_bound", r.theory_bound},
                              {"uncertainty", r.uncertainty},
                              {"groups", r.groups}});
            }
            write_file("variations.csv",
                       csv_text({"n", "j", "measured", "theory_bound", "uncertainty", "groups"},
                                rows));
            artifacts.push_back("variations.csv");
            fg::ordered_json j;
            j["len_cap"] = len_cap;
            j["rows"] = std::move(jt);
            write_file("variations.json", j.dump(2) + "\n");
            artifacts.push_back("variations.json");
        }
        stage_done(current);

        // 7. Gibbs property of the pushforward against the induced sums
        current = "gibbs-equivalence";
        {
            fg::PsiOptions popt;
            // context deep enough that every estimate clears the first
            // certified threshold
            int tail = std::max(2, s.threshold(1) + 1);
            fg::GibbsEquivalence ge = fg::verify_gibbs_equivalence(sys, s, 3, tail, popt);
            fg::ordered_json j;
            j["bowen_k"] = ge.bowen_k;
            j["c1"] = ge.c1;
            j["c2"] = ge.c2;
            j["lo"] = ge.lo;
            j["hi"] = ge.hi;
            j["min_ratio"] = ge.min_ratio;
            j["max_ratio"] = ge.max_ratio;
            j["slack"] = ge.slack;
            j["words_checked"] = ge.words_checked;
            j["pass"] = ge.pass;
            j["strict_pass"] = ge.strict_pass;
            write_file("gibbs_equivalence.json", j.dump(2) + "\n");
            artifacts.push_back("gibbs_equivalence.json");
            if (!ge.pass) throw fg::NumericError("pushforward failed the two-sided bounds");
        }
        stage_done(current);
    } catch (const std::exception& ex) {
        stages.push_back({{"name", current}, {"ok", false}, {"error", ex.what()}});
        manifest["stages"] = std::move(stages);
        manifest["artifacts"] = artifacts;
        manifest["failed_stage"] = current;
        write_file("manifest.json", manifest.dump(2) + "\n");
        std::cerr << "pipeline: stage " << current << " failed: " << ex.what() << "\n";
        return kExitStage;
    }

    manifest["stages"] = std::move(stages);
    manifest["artifacts"] = artifacts;
    manifest["failed_stage"] = nullptr;
    write_file("manifest.json", manifest.dump(2) + "\n");
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"factor-of-Gibbs toolkit"};
    app.require_subcommand(1);
    Opts o;

    auto add_common = [&](CLI::App* c, bool with_potential) {
        c->add_option("--system", o.system_path, "system description (JSON)");
        if (with_potential)
            c->add_option("--potential", o.potential_path, "potential description (JSON)");
        c->add_option("--sigma", o.sigma, "cone contraction parameter in (0,1)");
        c->add_option("--eps", o.eps, "requested certified error");
        c->add_option("--depth", o.depth, "table depth (-1: per-command default)");
        c->add_option("--cap", o.cap, "enumeration / probe cap (-1: per-command default)");
        c->add_option("--seed", o.seed, "seed for sampled checks");
        c->add_option("--out", o.out_path, "output file (pipeline: output directory)");
        c->add_option("--format", o.format, "output format: json or csv");
        c->add_option("--ref", o.ref, "reference measure: eigenmeasure or gibbs");
        c->add_option("--source", o.source, "variation envelope: bowen, walters or holder");
        c->add_option("--theta", o.theta, "geometric ratio for --source holder");
        c->add_option("--coeff", o.coeff, "coefficient for --source holder");
        c->add_option("--jmax", o.j_max, "schedule rows");
        c->add_option("--kmax", o.k_max, "schedule columns");
        c->add_option("--nsup", o.n_sup, "sup horizon for --source walters");
    };

    CLI::App* c_mix = app.add_subcommand("check-mixing", "topological and fiber mixing");
    add_common(c_mix, false);
    CLI::App* c_classify = app.add_subcommand("classify", "regularity class of the potential");
    add_common(c_classify, true);
    CLI::App* c_spectrum = app.add_subcommand("spectrum", "transfer-operator eigendata");
    add_common(c_spectrum, true);
    CLI::App* c_gibbs = app.add_subcommand("gibbs", "Gibbs cylinder table and bounds");
    add_common(c_gibbs, true);
    CLI::App* c_push = app.add_subcommand("push", "pushforward masses, two routes");
    add_common(c_push, true);
    CLI::App* c_psi = app.add_subcommand("psi", "induced potential with certificates");
    add_common(c_psi, true);
    CLI::App* c_var = app.add_subcommand("variations", "variation table of the induced potential");
    add_common(c_var, true);
    CLI::App* c_sched = app.add_subcommand("schedule", "cone schedule and contraction constants");
    add_common(c_sched, true);
    CLI::App* c_verify = app.add_subcommand("verify", "property battery");
    add_common(c_verify, true);
    CLI::App* c_pipe = app.add_subcommand("pipeline", "full analysis into --out");
    add_common(c_pipe, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInput;
    }

    try {
        if (app.got_subcommand(c_mix)) return cmd_check_mixing(o);
        if (app.got_subcommand(c_classify)) return cmd_classify(o);
        if (app.got_subcommand(c_spectrum)) return cmd_spectrum(o);
        if (app.got_subcommand(c_gibbs)) return cmd_gibbs(o);
        if (app.got_subcommand(c_push)) return cmd_push(o);
        if (app.got_subcommand(c_psi)) return cmd_psi(o);
        if (app.got_subcommand(c_var)) return cmd_variations(o);
        if (app.got_subcommand(c_sched)) return cmd_schedule(o);
        if (app.got_subcommand(c_verify)) return cmd_verify(o);
        if (app.got_subcommand(c_pipe)) return cmd_pipeline(o);
    } catch (const fg::CapacityError& e) {
        std::cerr << "not certifiable within the given caps: " << e.what() << "\n";
        return kExitNotFound;
    } catch (const std::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
