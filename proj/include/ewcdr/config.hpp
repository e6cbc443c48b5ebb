#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ewcdr/errors.hpp"
#include "ewcdr/importance.hpp"
#include "ewcdr/io.hpp"
#include "ewcdr/metrics.hpp"
#include "ewcdr/trainer.hpp"

namespace ewcdr {

struct DatasetSpec {
    enum class Kind { synthetic, idx };
    Kind kind = Kind::synthetic;

    // synthetic
    std::size_t classes = 10;
    std::size_t dim = 16;
    std::size_t per_class = 100;
    double separation = 3.0;
    std::uint64_t seed = 7;

    // idx
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    bool normalize = true;

    bool operator==(const DatasetSpec&) const = default;
};

struct ProtocolSpec {
    enum class Kind { equal, big_start };
    Kind kind = Kind::equal;
    std::size_t tasks = 5;            // equal split
    std::size_t initial_classes = 0;  // big start
    std::size_t increment_size = 0;
    std::uint64_t seed = 11;

    bool operator==(const ProtocolSpec&) const = default;
};

struct RunConfig {
    DatasetSpec dataset;
    ProtocolSpec protocol;
    TrainConfig train;
    std::vector<std::uint64_t> seeds = {1};
    std::string output_dir = "out";
    Weighting weighting = Weighting::task_balanced;

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == ',') {
            const std::string item = trim(std::string_view(s).substr(start, i - start));
            if (!item.empty()) out.push_back(item);
            start = i + 1;
        }
    }
    return out;
}

// Section -> key -> value, from "key = value" lines under [section] headers.
// '#' starts a comment. Values may be double-quoted to protect '#' or
// leading/trailing spaces in paths.
inline std::map<std::string, std::map<std::string, std::string>> parse_sections(
    const std::string& text) {
    std::map<std::string, std::map<std::string, std::string>> out;
    std::string section;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;

        // strip comments, respecting optional double quotes
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty())
                throw config_error("line " + std::to_string(lineno) + ": empty section name");
            out[section];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty())
            throw config_error("line " + std::to_string(lineno) + ": empty key");
        if (section.empty())
            throw config_error("line " + std::to_string(lineno) + ": key outside any section");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (!out[section].emplace(key, value).second)
            throw config_error("line " + std::to_string(lineno) + ": duplicate key '" + key +
                               "' in [" + section + "]");
    }
    return out;
}

// Typed readers over one section, tracking which keys were consumed so
// unknown keys can be reported as errors.
class SectionReader {
public:
    SectionReader(const std::string& name, const std::map<std::string, std::string>& kv)
        : name_(name), kv_(kv) {}

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string str(const std::string& key, const std::string& fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return it->second;
    }

    std::string require(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end())
            throw config_error("[" + name_ + "] is missing required key '" + key + "'");
        used_.insert(key);
        return it->second;
    }

    double number(const std::string& key, double fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return parse_number(key, it->second);
    }

    std::size_t count(const std::string& key, std::size_t fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return parse_count(key, it->second);
    }

    bool flag(const std::string& key, bool fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        if (it->second == "true") return true;
        if (it->second == "false") return false;
        throw config_error("[" + name_ + "] " + key + ": expected true or false, got '" +
                           it->second + "'");
    }

    void finish() const {
        for (const auto& [key, value] : kv_) {
            (void)value;
            if (!used_.count(key))
                throw config_error("[" + name_ + "] has unknown key '" + key + "'");
        }
    }

    double parse_number(const std::string& key, const std::string& raw) const {
        try {
            std::size_t used = 0;
            const double v = std::stod(raw, &used);
            if (used != raw.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw config_error("[" + name_ + "] " + key + ": cannot parse number '" + raw + "'");
        }
    }

    std::size_t parse_count(const std::string& key, const std::string& raw) const {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(raw, &used);
            if (used != raw.size()) throw std::invalid_argument("trailing characters");
            if (v < 0) throw std::invalid_argument("negative");
            return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw config_error("[" + name_ + "] " + key + ": cannot parse count '" + raw + "'");
        }
    }

    const std::string& name() const { return name_; }

private:
    std::string name_;
    const std::map<std::string, std::string>& kv_;
    std::set<std::string> used_;
};

}  // namespace detail

inline void validate(const RunConfig& cfg);

inline RunConfig parse_config_text(const std::string& text) {
    auto sections = detail::parse_sections(text);
    for (const auto& [name, kv] : sections) {
        (void)kv;
        if (name != "dataset" && name != "protocol" && name != "train" && name != "run")
            throw config_error("unknown section [" + name + "]");
    }
    if (!sections.count("dataset")) throw config_error("missing required section [dataset]");

    RunConfig cfg;
    static const std::map<std::string, std::string> empty;

    {
        detail::SectionReader r("dataset", sections.at("dataset"));
        const std::string kind = r.require("kind");
        if (kind == "synthetic") {
            cfg.dataset.kind = DatasetSpec::Kind::synthetic;
            cfg.dataset.classes = r.count("classes", cfg.dataset.classes);
            cfg.dataset.dim = r.count("dim", cfg.dataset.dim);
            cfg.dataset.per_class = r.count("per_class", cfg.dataset.per_class);
            cfg.dataset.separation = r.number("separation", cfg.dataset.separation);
            cfg.dataset.seed = r.count("seed", cfg.dataset.seed);
        } else if (kind == "idx") {
            cfg.dataset.kind = DatasetSpec::Kind::idx;
            cfg.dataset.train_images = r.require("train_images");
            cfg.dataset.train_labels = r.require("train_labels");
            cfg.dataset.test_images = r.require("test_images");
            cfg.dataset.test_labels = r.require("test_labels");
            cfg.dataset.normalize = r.flag("normalize", cfg.dataset.normalize);
        } else {
            throw config_error("[dataset] kind must be synthetic or idx, got '" + kind + "'");
        }
        r.finish();
    }

    {
        detail::SectionReader r("protocol",
                                sections.count("protocol") ? sections.at("protocol") : empty);
        const std::string kind = r.str("kind", "equal");
        if (kind == "equal") {
            cfg.protocol.kind = ProtocolSpec::Kind::equal;
            cfg.protocol.tasks = r.count("tasks", cfg.protocol.tasks);
        } else if (kind == "big_start") {
            cfg.protocol.kind = ProtocolSpec::Kind::big_start;
            cfg.protocol.initial_classes = r.count("initial", 0);
            cfg.protocol.increment_size = r.count("increment", 0);
            if (cfg.protocol.initial_classes == 0)
                throw config_error("[protocol] big_start needs initial > 0");
            if (cfg.protocol.increment_size == 0)
                throw config_error("[protocol] big_start needs increment > 0");
        } else {
            throw config_error("[protocol] kind must be equal or big_start, got '" + kind + "'");
        }
        cfg.protocol.seed = r.count("seed", cfg.protocol.seed);
        r.finish();
    }

    {
        detail::SectionReader r("train", sections.count("train") ? sections.at("train") : empty);
        const std::string method = r.str("method", method_name(cfg.train.method));
        const auto m = method_from_name(method);
        if (!m) throw config_error("[train] unknown method '" + method + "'");
        cfg.train.method = *m;
        cfg.train.epochs = r.count("epochs", cfg.train.epochs);
        cfg.train.batch_size = r.count("batch", cfg.train.batch_size);
        cfg.train.lr = r.number("lr", cfg.train.lr);
        cfg.train.momentum = r.number("momentum", cfg.train.momentum);
        cfg.train.weight_decay = r.number("weight_decay", cfg.train.weight_decay);
        cfg.train.lambda = r.number("lambda", cfg.train.lambda);
        cfg.train.gamma = r.number("gamma", cfg.train.gamma);
        cfg.train.si_xi = r.number("si_xi", cfg.train.si_xi);
        cfg.train.head_init_scale = r.number("head_init", cfg.train.head_init_scale);
        if (r.has("hidden")) {
            cfg.train.hidden_widths.clear();
            for (const auto& item : detail::split_list(r.str("hidden", "")))
                cfg.train.hidden_widths.push_back(r.parse_count("hidden", item));
        }
        if (r.has("milestones")) {
            cfg.train.lr_milestones.clear();
            for (const auto& item : detail::split_list(r.str("milestones", ""))) {
                const std::size_t colon = item.find(':');
                if (colon == std::string::npos)
                    throw config_error("[train] milestones: expected epoch:factor, got '" +
                                       item + "'");
                Milestone ms;
                ms.epoch = r.parse_count("milestones", item.substr(0, colon));
                ms.factor = r.parse_number("milestones", item.substr(colon + 1));
                cfg.train.lr_milestones.push_back(ms);
            }
        }
        r.finish();
    }

    {
        detail::SectionReader r("run", sections.count("run") ? sections.at("run") : empty);
        if (r.has("seeds")) {
            cfg.seeds.clear();
            for (const auto& item : detail::split_list(r.str("seeds", "")))
                cfg.seeds.push_back(r.parse_count("seeds", item));
            if (cfg.seeds.empty()) throw config_error("[run] seeds: list is empty");
        }
        cfg.output_dir = r.str("output", cfg.output_dir);
        const std::string w = r.str("weighting", weighting_name(cfg.weighting));
        if (w == "task_balanced")
            cfg.weighting = Weighting::task_balanced;
        else if (w == "sample_weighted")
            cfg.weighting = Weighting::sample_weighted;
        else
            throw config_error("[run] weighting must be task_balanced or sample_weighted");
        r.finish();
    }

    validate(cfg);
    return cfg;
}

inline void validate(const RunConfig& cfg) {
    try {
        cfg.train.validate();
    } catch (const validation_error& e) {
        throw config_error(e.what());
    }
    if (cfg.seeds.empty()) throw config_error("run config: need at least one seed");
    if (cfg.output_dir.empty()) throw config_error("run config: output directory is empty");
    if (cfg.dataset.kind == DatasetSpec::Kind::synthetic) {
        if (cfg.dataset.classes == 0 || cfg.dataset.dim == 0 || cfg.dataset.per_class == 0)
            throw config_error("run config: synthetic dataset needs classes, dim, per_class > 0");
        if (cfg.dataset.separation < 0.0)
            throw config_error("run config: separation must be >= 0");
        // Protocol arithmetic is checked here, before any data is generated.
        if (cfg.protocol.kind == ProtocolSpec::Kind::equal) {
            if (cfg.protocol.tasks == 0 || cfg.dataset.classes % cfg.protocol.tasks != 0)
                throw config_error("run config: " + std::to_string(cfg.dataset.classes) +
                                   " classes do not divide into " +
                                   std::to_string(cfg.protocol.tasks) + " tasks");
        } else {
            if (cfg.protocol.initial_classes >= cfg.dataset.classes ||
                (cfg.dataset.classes - cfg.protocol.initial_classes) %
                        cfg.protocol.increment_size !=
                    0)
                throw config_error("run config: big_start split does not cover the classes");
        }
    }
}

inline RunConfig parse_config_file(const std::filesystem::path& path) {
    return parse_config_text(read_file(path));
}

// Canonical text form; parsing it back yields an identical RunConfig.
inline std::string serialize_config(const RunConfig& cfg) {
    std::string out = "[dataset]\n";
    if (cfg.dataset.kind == DatasetSpec::Kind::synthetic) {
        out += "kind = synthetic\n";
        out += "classes = " + std::to_string(cfg.dataset.classes) + "\n";
        out += "dim = " + std::to_string(cfg.dataset.dim) + "\n";
        out += "per_class = " + std::to_string(cfg.dataset.per_class) + "\n";
        out += "separation = " + format_double(cfg.dataset.separation) + "\n";
        out += "seed = " + std::to_string(cfg.dataset.seed) + "\n";
    } else {
        out += "kind = idx\n";
        out += "train_images = \"" + cfg.dataset.train_images + "\"\n";
        out += "train_labels = \"" + cfg.dataset.train_labels + "\"\n";
        out += "test_images = \"" + cfg.dataset.test_images + "\"\n";
        out += "test_labels = \"" + cfg.dataset.test_labels + "\"\n";
        out += std::string("normalize = ") + (cfg.dataset.normalize ? "true" : "false") + "\n";
    }
    out += "\n[protocol]\n";
    if (cfg.protocol.kind == ProtocolSpec::Kind::equal) {
        out += "kind = equal\n";
        out += "tasks = " + std::to_string(cfg.protocol.tasks) + "\n";
    } else {
        out += "kind = big_start\n";
        out += "initial = " + std::to_string(cfg.protocol.initial_classes) + "\n";
        out += "increment = " + std::to_string(cfg.protocol.increment_size) + "\n";
    }
    out += "seed = " + std::to_string(cfg.protocol.seed) + "\n";
    out += "\n[train]\n";
    out += "method = " + method_name(cfg.train.method) + "\n";
    out += "epochs = " + std::to_string(cfg.train.epochs) + "\n";
    out += "batch = " + std::to_string(cfg.train.batch_size) + "\n";
    out += "lr = " + format_double(cfg.train.lr) + "\n";
    out += "momentum = " + format_double(cfg.train.momentum) + "\n";
    out += "weight_decay = " + format_double(cfg.train.weight_decay) + "\n";
    out += "lambda = " + format_double(cfg.train.lambda) + "\n";
    out += "gamma = " + format_double(cfg.train.gamma) + "\n";
    out += "si_xi = " + format_double(cfg.train.si_xi) + "\n";
    out += "head_init = " + format_double(cfg.train.head_init_scale) + "\n";
    out += "hidden = ";
    for (std::size_t i = 0; i < cfg.train.hidden_widths.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(cfg.train.hidden_widths[i]);
    }
    out += "\n";
    out += "milestones = ";
    for (std::size_t i = 0; i < cfg.train.lr_milestones.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(cfg.train.lr_milestones[i].epoch) + ":" +
               format_double(cfg.train.lr_milestones[i].factor);
    }
    out += "\n";
    out += "\n[run]\n";
    out += "seeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(cfg.seeds[i]);
    }
    out += "\n";
    out += "output = \"" + cfg.output_dir + "\"\n";
    out += "weighting = " + weighting_name(cfg.weighting) + "\n";
    return out;
}

}  // namespace ewcdr
