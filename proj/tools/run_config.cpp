#include "run_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <type_traits>

#include "martkit/error.hpp"

namespace martkit::cli {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    fail(ErrorKind::InvalidArgument, "config " + path + ": " + what);
}

// Reads known keys of one JSON object and rejects the rest.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) bad(path_, "expected an object");
    }
    void finish() const {
        for (const auto& item : j_.items())
            if (!used_.count(item.key())) bad(at(item.key()), "unknown key");
    }

    const json* find(const std::string& key) {
        used_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    std::string at(const std::string& key) const { return path_ + "." + key; }

    void number(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) bad(at(key), "expected a number");
            out = v->get<double>();
        }
    }
    template <class Int>
    void integer(const std::string& key, Int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) bad(at(key), "expected an integer");
            if (std::is_unsigned_v<Int> && v->get<long long>() < 0)
                bad(at(key), "expected a non-negative integer");
            out = v->get<Int>();
        }
    }
    void boolean(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) bad(at(key), "expected true or false");
            out = v->get<bool>();
        }
    }
    std::optional<std::string> string(const std::string& key) {
        if (const json* v = find(key)) {
            if (!v->is_string()) bad(at(key), "expected a string");
            return v->get<std::string>();
        }
        return std::nullopt;
    }
    void numbers(const std::string& key, std::vector<double>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) bad(at(key), "expected an array of numbers");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number()) bad(at(key), "expected an array of numbers");
                out.push_back(e.get<double>());
            }
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <class Enum, class Parse>
void choice(Reader& r, const std::string& key, Enum& out, Parse parse, const std::string& allowed) {
    if (auto s = r.string(key)) {
        const auto v = parse(*s);
        if (!v) bad(r.at(key), "expected one of " + allowed + ", got '" + *s + "'");
        out = *v;
    }
}

std::optional<CandidateSource> parse_source(const std::string& s) {
    if (s == "sample_values") return CandidateSource::SampleValues;
    if (s == "uniform_quantiles") return CandidateSource::UniformQuantiles;
    return std::nullopt;
}

std::optional<InitKind> parse_init(const std::string& s) {
    if (s == "mar") return InitKind::MarInit;
    if (s == "identity") return InitKind::Identity;
    return std::nullopt;
}

std::optional<Setting> parse_setting(const std::string& s) {
    if (s == "I") return Setting::I;
    if (s == "II") return Setting::II;
    return std::nullopt;
}

std::optional<NoiseDistribution> parse_distribution(const std::string& s) {
    if (s == "gaussian") return NoiseDistribution::Gaussian;
    if (s == "student_t") return NoiseDistribution::StudentT;
    return std::nullopt;
}

void apply_model(const json& j, RunConfig& cfg) {
    Reader r(j, "model");
    choice(r, "kind", cfg.model.tag, [](const std::string& s) { return parse_model_tag(s); },
           "2mart, ktmar, smart, tmar, tmar3, mar, var, rrvar");
    r.integer("rank_k", cfg.model.rank_k);
    choice(r, "threshold_axis", cfg.model.threshold_axis,
           [](const std::string& s) { return parse_threshold_axis(s); }, "z, w, auto");
    r.finish();
}

void apply_grid(const json& j, RunConfig& cfg) {
    Reader r(j, "grid");
    r.number("trim_fraction", cfg.grid.trim_fraction);
    r.integer("max_candidates_per_axis", cfg.grid.max_candidates_per_axis);
    choice(r, "source", cfg.grid.source, parse_source, "sample_values, uniform_quantiles");
    r.boolean("refine", cfg.grid.refine);
    r.integer("refine_top_k", cfg.grid.refine_top_k);
    r.integer("max_sweeps", cfg.grid.max_sweeps);
    r.numbers("extra_r", cfg.grid.extra_r);
    r.numbers("extra_s", cfg.grid.extra_s);
    r.finish();
}

void apply_als(const json& j, RunConfig& cfg) {
    Reader r(j, "als");
    r.integer("max_iters", cfg.als.max_iters);
    r.number("rel_tol", cfg.als.rel_tol);
    r.number("grad_tol", cfg.als.grad_tol);
    choice(r, "init", cfg.als.init, parse_init, "mar, identity");
    r.finish();
}

void apply_simulate(const json& j, RunConfig& cfg) {
    Reader r(j, "simulate");
    r.integer("m", cfg.m);
    r.integer("n", cfg.n);
    r.integer("length", cfg.length);
    r.integer("burn_in", cfg.burn_in);
    r.finish();
}

void apply_noise(const json& j, RunConfig& cfg) {
    Reader r(j, "noise");
    choice(r, "setting", cfg.setting, parse_setting, "I, II");
    choice(r, "distribution", cfg.distribution, parse_distribution, "gaussian, student_t");
    r.number("student_df", cfg.student_df);
    r.finish();
}

void apply_inference(const json& j, RunConfig& cfg) {
    Reader r(j, "inference");
    r.number("level", cfg.level);
    r.number("threshold_level", cfg.threshold_level);
    r.integer("n_sims", cfg.n_sims);
    std::optional<double> bz, bw;
    if (r.find("bandwidth_z")) {
        double v = 0.0;
        r.number("bandwidth_z", v);
        bz = v;
    }
    if (r.find("bandwidth_w")) {
        double v = 0.0;
        r.number("bandwidth_w", v);
        bw = v;
    }
    if (bz.has_value() != bw.has_value())
        bad("inference", "bandwidth_z and bandwidth_w must be given together");
    if (bz) cfg.bandwidths = Bandwidths{*bz, *bw};
    r.finish();
}

void apply_rolling(const json& j, RunConfig& cfg) {
    Reader r(j, "rolling");
    RollingSpec spec = cfg.rolling.value_or(RollingSpec{0, 0, 0, 0});
    r.integer("train_window", spec.train_window);
    r.integer("test_start", spec.test_start);
    r.integer("test_end", spec.test_end);
    r.integer("refit_every", spec.refit_every);
    cfg.rolling = spec;
    r.finish();
}

void apply_benchmark(const json& j, RunConfig& cfg) {
    Reader r(j, "benchmark");
    if (const json* v = r.find("models")) {
        if (!v->is_array() || v->empty()) bad("benchmark.models", "expected a non-empty array");
        cfg.models.clear();
        for (const auto& e : *v) {
            const auto tag = e.is_string() ? parse_model_tag(e.get<std::string>()) : std::nullopt;
            if (!tag) bad("benchmark.models", "unknown model " + e.dump());
            cfg.models.push_back(*tag);
        }
    }
    r.finish();
}

void apply_replicate(const json& j, RunConfig& cfg) {
    Reader r(j, "replicate");
    if (const json* v = r.find("lengths")) {
        if (!v->is_array() || v->empty()) bad("replicate.lengths", "expected a non-empty array");
        cfg.lengths.clear();
        for (const auto& e : *v) {
            if (!e.is_number_integer() || e.get<long long>() < 2)
                bad("replicate.lengths", "expected integers >= 2");
            cfg.lengths.push_back(e.get<std::size_t>());
        }
    }
    r.integer("reps", cfg.reps);
    choice(r, "what", cfg.what, parse_what, "error, ecp-coef, ecp-threshold, all");
    r.finish();
}

void apply_data(const json& j, RunConfig& cfg) {
    Reader r(j, "data");
    if (auto s = r.string("matrix")) cfg.matrix_path = *s;
    if (auto s = r.string("thresholds")) cfg.thresholds_path = *s;
    r.finish();
}

}  // namespace

std::optional<ReplicateWhat> parse_what(const std::string& name) {
    if (name == "error") return ReplicateWhat::Error;
    if (name == "ecp-coef") return ReplicateWhat::EcpCoef;
    if (name == "ecp-threshold") return ReplicateWhat::EcpThreshold;
    if (name == "all") return ReplicateWhat::All;
    return std::nullopt;
}

std::string to_string(ReplicateWhat what) {
    switch (what) {
        case ReplicateWhat::Error: return "error";
        case ReplicateWhat::EcpCoef: return "ecp-coef";
        case ReplicateWhat::EcpThreshold: return "ecp-threshold";
        case ReplicateWhat::All: return "all";
    }
    return "all";
}

void apply_config(const nlohmann::json& doc, RunConfig& cfg) {
    Reader r(doc, "$");
    if (const json* v = r.find("model")) apply_model(*v, cfg);
    if (const json* v = r.find("grid")) apply_grid(*v, cfg);
    if (const json* v = r.find("als")) apply_als(*v, cfg);
    if (const json* v = r.find("simulate")) apply_simulate(*v, cfg);
    if (const json* v = r.find("noise")) apply_noise(*v, cfg);
    if (const json* v = r.find("inference")) apply_inference(*v, cfg);
    if (const json* v = r.find("rolling")) apply_rolling(*v, cfg);
    if (const json* v = r.find("benchmark")) apply_benchmark(*v, cfg);
    if (const json* v = r.find("replicate")) apply_replicate(*v, cfg);
    if (const json* v = r.find("data")) apply_data(*v, cfg);
    r.integer("seed", cfg.seed);
    r.integer("threads", cfg.threads);
    if (auto s = r.string("out_dir")) cfg.out_dir = *s;
    r.finish();
}

void load_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::InvalidArgument, "cannot open config " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::InvalidArgument, "config " + path + " is not valid JSON: " + e.what());
    }
    apply_config(doc, cfg);
}

RollingSpec default_rolling(std::size_t length) {
    const int t = static_cast<int>(length);
    const int span = std::max(1, t / 10);
    RollingSpec spec;
    spec.test_start = t - span + 1;
    spec.test_end = t;
    spec.train_window = spec.test_start - 1;
    return spec;
}

RollingSpec resolve_rolling(const std::optional<RollingSpec>& given, std::size_t length) {
    RollingSpec spec = default_rolling(length);
    if (!given) return spec;
    if (given->test_start != 0) spec.test_start = given->test_start;
    spec.test_end = given->test_end != 0 ? given->test_end : static_cast<int>(length);
    spec.train_window = given->train_window != 0 ? given->train_window : spec.test_start - 1;
    if (given->refit_every != 0) spec.refit_every = given->refit_every;
    return spec;
}

}  // namespace martkit::cli
