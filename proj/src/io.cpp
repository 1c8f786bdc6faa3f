#include "snowode/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "snowode/csv.hpp"
#include "snowode/error.hpp"
#include "snowode/time.hpp"

namespace snowode {

using nlohmann::json;

Metadata artifact_metadata(std::string_view kind)
{
    return {{"generator", "snowode " + std::string(snowode_version)}, {"artifact", std::string(kind)}};
}

void append_hyperparams(Metadata &meta, const Hyperparams &hp)
{
    meta.emplace_back("window_days", std::to_string(hp.window_days));
    meta.emplace_back("width_multiplier", std::to_string(hp.width_multiplier));
    meta.emplace_back("error_exponent", format_double(hp.error_exponent));
    meta.emplace_back("magnitude_exponent", format_double(hp.magnitude_exponent));
    meta.emplace_back("batch_size", std::to_string(hp.batch_size));
    meta.emplace_back("epochs", std::to_string(hp.epochs));
    meta.emplace_back("learning_rate", format_double(hp.learning_rate));
    meta.emplace_back("rmsprop_rho", format_double(hp.rmsprop_rho));
    meta.emplace_back("rmsprop_epsilon", format_double(hp.rmsprop_epsilon));
    meta.emplace_back("seed", std::to_string(hp.seed));
}

namespace {

const char *const hp_keys[] = {"N",      "n",             "n1",          "n2",              "batch_size",
                               "epochs", "learning_rate", "rmsprop_rho", "rmsprop_epsilon", "seed"};

void set_hyperparam(Hyperparams &hp, const std::string &key, const json &v)
{
    if (key == "N")
        hp.window_days = v.get<int>();
    else if (key == "n")
        hp.width_multiplier = v.get<int>();
    else if (key == "n1")
        hp.error_exponent = v.get<double>();
    else if (key == "n2")
        hp.magnitude_exponent = v.get<double>();
    else if (key == "batch_size")
        hp.batch_size = v.get<int>();
    else if (key == "epochs")
        hp.epochs = v.get<int>();
    else if (key == "learning_rate")
        hp.learning_rate = v.get<double>();
    else if (key == "rmsprop_rho")
        hp.rmsprop_rho = v.get<double>();
    else if (key == "rmsprop_epsilon")
        hp.rmsprop_epsilon = v.get<double>();
    else if (key == "seed")
        hp.seed = v.get<std::uint64_t>();
    else
        throw InvalidConfiguration("unknown hyperparameter '" + key + "'");
}

json parse_config(const std::string &text, const char *what)
{
    try {
        const json j = json::parse(text);
        if (!j.is_object())
            throw InvalidConfiguration(std::string(what) + " must be a JSON object");
        return j;
    } catch (const json::exception &e) {
        throw InvalidConfiguration(std::string("malformed ") + what + ": " + e.what());
    }
}

Hyperparams apply_object(const json &j, Hyperparams hp)
{
    try {
        for (const auto &[k, v] : j.items())
            set_hyperparam(hp, k, v);
    } catch (const json::exception &e) {
        throw InvalidConfiguration(std::string("hyperparameter config: ") + e.what());
    }
    hp.validate();
    return hp;
}

} // namespace

Hyperparams hyperparams_from_json_text(const std::string &text, Hyperparams base)
{
    return apply_object(parse_config(text, "hyperparameter config"), base);
}

std::string hyperparams_to_json_text(const Hyperparams &hp)
{
    json j;
    j["N"] = hp.window_days;
    j["n"] = hp.width_multiplier;
    j["n1"] = hp.error_exponent;
    j["n2"] = hp.magnitude_exponent;
    j["batch_size"] = hp.batch_size;
    j["epochs"] = hp.epochs;
    j["learning_rate"] = hp.learning_rate;
    j["rmsprop_rho"] = hp.rmsprop_rho;
    j["rmsprop_epsilon"] = hp.rmsprop_epsilon;
    j["seed"] = hp.seed;
    return j.dump(2);
}

std::vector<Hyperparams> grid_from_json_text(const std::string &text)
{
    const json j = parse_config(text, "grid config");
    for (const auto &[k, v] : j.items())
        if (k != "base" && k != "grid")
            throw InvalidConfiguration("unknown grid config key '" + k + "'");
    const Hyperparams base = j.contains("base") ? apply_object(j.at("base"), Hyperparams{}) : Hyperparams{};
    std::vector<Hyperparams> out{base};
    if (!j.contains("grid"))
        return out;
    const json &g = j.at("grid");
    for (const auto &[k, v] : g.items())
        if (std::find(std::begin(hp_keys), std::end(hp_keys), k) == std::end(hp_keys))
            throw InvalidConfiguration("unknown hyperparameter '" + k + "'");
    for (const char *key : hp_keys) {
        if (!g.contains(key))
            continue;
        const json &values = g.at(key);
        if (!values.is_array() || values.empty())
            throw InvalidConfiguration(std::string("grid entry '") + key + "' must be a non-empty list");
        std::vector<Hyperparams> next;
        for (const Hyperparams &hp : out)
            for (const json &v : values) {
                Hyperparams h = hp;
                try {
                    set_hyperparam(h, key, v);
                } catch (const json::exception &e) {
                    throw InvalidConfiguration(std::string("grid config: ") + e.what());
                }
                h.validate();
                next.push_back(h);
            }
        out = std::move(next);
    }
    return out;
}

namespace {

constexpr char b64_alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c)
{
    if (c >= 'A' && c <= 'Z')
        return c - 'A';
    if (c >= 'a' && c <= 'z')
        return c - 'a' + 26;
    if (c >= '0' && c <= '9')
        return c - '0' + 52;
    if (c == '+')
        return 62;
    if (c == '/')
        return 63;
    return -1;
}

} // namespace

std::string base64_encode(std::span<const unsigned char> bytes)
{
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v = (std::uint32_t{bytes[i]} << 16) | (std::uint32_t{bytes[i + 1]} << 8) | bytes[i + 2];
        out.push_back(b64_alphabet[(v >> 18) & 63]);
        out.push_back(b64_alphabet[(v >> 12) & 63]);
        out.push_back(b64_alphabet[(v >> 6) & 63]);
        out.push_back(b64_alphabet[v & 63]);
    }
    const std::size_t rest = bytes.size() - i;
    if (rest) {
        std::uint32_t v = std::uint32_t{bytes[i]} << 16;
        if (rest == 2)
            v |= std::uint32_t{bytes[i + 1]} << 8;
        out.push_back(b64_alphabet[(v >> 18) & 63]);
        out.push_back(b64_alphabet[(v >> 12) & 63]);
        out.push_back(rest == 2 ? b64_alphabet[(v >> 6) & 63] : '=');
        out.push_back('=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(std::string_view text)
{
    if (text.size() % 4 != 0)
        throw DataError("base64 length is not a multiple of 4");
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int v[4];
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + static_cast<std::size_t>(j)];
            if (c == '=' && i + 4 == text.size() && j >= 2) {
                v[j] = 0;
                ++pad;
            } else {
                v[j] = b64_value(c);
                if (v[j] < 0 || pad)
                    throw DataError("invalid base64 data");
            }
        }
        const std::uint32_t w = (static_cast<std::uint32_t>(v[0]) << 18) | (static_cast<std::uint32_t>(v[1]) << 12) |
                                (static_cast<std::uint32_t>(v[2]) << 6) | static_cast<std::uint32_t>(v[3]);
        out.push_back(static_cast<unsigned char>(w >> 16));
        if (pad < 2)
            out.push_back(static_cast<unsigned char>(w >> 8));
        if (pad < 1)
            out.push_back(static_cast<unsigned char>(w));
    }
    return out;
}

std::string encode_doubles(std::span<const double> values)
{
    std::vector<unsigned char> bytes;
    bytes.reserve(values.size() * 8);
    for (double d : values) {
        const auto bits = std::bit_cast<std::uint64_t>(d);
        for (int b = 0; b < 8; ++b)
            bytes.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    }
    return base64_encode(bytes);
}

std::vector<double> decode_doubles(std::string_view text)
{
    const std::vector<unsigned char> bytes = base64_decode(text);
    if (bytes.size() % 8 != 0)
        throw DataError("encoded array is not a whole number of doubles");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
            bits |= std::uint64_t{bytes[i * 8 + static_cast<std::size_t>(b)]} << (8 * b);
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

std::string model_to_json(const ConstrainedModel &model, const Metadata &meta)
{
    const PredictiveNet &net = model.net();
    const ThresholdSpec &s = model.spec();
    json j;
    j["format"] = "snowode-model";
    j["version"] = 1;
    j["target"] = std::string(to_string(model.target()));
    j["dt"] = model.dt();
    j["net"] = {{"k", net.k},
                {"n", net.n},
                {"act1", std::string(to_string(net.act1))},
                {"act2", std::string(to_string(net.act2))},
                {"elu_alpha", net.elu_alpha},
                {"params", encode_doubles(flatten(net))}};
    j["thresholds"] = {{"mode", std::string(to_string(s.mode))},
                       {"lower", std::string(to_string(s.lower))},
                       {"upper", std::string(to_string(s.upper))},
                       {"lower_hint", std::string(to_string(s.lower_hint))},
                       {"upper_hint", std::string(to_string(s.upper_hint))},
                       {"state_feature", s.state_feature},
                       {"snowfall_feature", s.snowfall_feature}};
    j["scale_x"] = encode_doubles(model.scale_x());
    const double sy = model.scale_y();
    j["scale_y"] = encode_doubles(std::span<const double>(&sy, 1));
    json m = json::object();
    for (const auto &[k, v] : meta)
        m[k] = v;
    j["metadata"] = m;
    return j.dump();
}

ConstrainedModel model_from_json(const std::string &text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw DataError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "snowode-model")
            throw DataError("not a snowode model file");
        if (j.at("version").get<int>() != 1)
            throw DataError("unsupported model file version");
        const json &jn = j.at("net");
        NetInit init;
        init.act1 = activation_from_string(jn.at("act1").get<std::string>());
        init.act2 = activation_from_string(jn.at("act2").get<std::string>());
        init.elu_alpha = jn.at("elu_alpha").get<double>();
        PredictiveNet net = zero_predictive(jn.at("k").get<int>(), jn.at("n").get<int>(), init);
        const std::vector<double> params = decode_doubles(jn.at("params").get<std::string>());
        if (params.size() != net.parameter_count())
            throw DataError("model parameter count does not match its shape");
        unflatten(params, net);

        const json &jt = j.at("thresholds");
        ThresholdSpec s;
        s.mode = clamp_mode_from_string(jt.at("mode").get<std::string>());
        s.lower = lower_threshold_from_string(jt.at("lower").get<std::string>());
        s.upper = upper_threshold_from_string(jt.at("upper").get<std::string>());
        s.lower_hint = sign_hint_from_string(jt.at("lower_hint").get<std::string>());
        s.upper_hint = sign_hint_from_string(jt.at("upper_hint").get<std::string>());
        s.state_feature = jt.at("state_feature").get<int>();
        s.snowfall_feature = jt.at("snowfall_feature").get<int>();

        const std::vector<double> sy = decode_doubles(j.at("scale_y").get<std::string>());
        if (sy.size() != 1)
            throw DataError("scale_y must hold one value");
        return ConstrainedModel(std::move(net), s, decode_doubles(j.at("scale_x").get<std::string>()), sy[0],
                                j.at("dt").get<double>(), state_variable_from_string(j.at("target").get<std::string>()));
    } catch (const json::exception &e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

void save_model(const std::string &path, const ConstrainedModel &model, const Metadata &meta)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write '" + path + "'");
    out << model_to_json(model, meta) << '\n';
}

ConstrainedModel load_model(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

void write_processed_csv(std::ostream &out, const std::vector<ProcessedRecord> &records, const Metadata &meta)
{
    write_metadata(out, meta);
    write_row(out, std::vector<std::string>(std::begin(processed_columns), std::end(processed_columns)));
    for (const ProcessedRecord &r : records)
        write_row(out, {r.site, format_timestamp(r.time), format_double(r.z), format_double(r.swe),
                        format_double(r.rh), format_double(r.solar), format_double(r.wind), format_double(r.t_air),
                        format_double(r.precip), format_double(r.f_snow), format_double(r.p_snow),
                        format_double(r.p_rain), format_double(r.dz_dt), format_double(r.dswe_dt)});
}

std::vector<ProcessedRecord> read_processed_csv(std::istream &in)
{
    const CsvDocument doc = read_csv(in);
    std::vector<std::size_t> col;
    for (std::string_view name : processed_columns)
        col.push_back(doc.require(name));
    std::vector<ProcessedRecord> out;
    out.reserve(doc.rows.size());
    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
        const auto &f = doc.rows[r];
        if (f.size() != doc.header.size())
            throw DataError("processed CSV line " + std::to_string(doc.line_numbers[r]) + " has " +
                            std::to_string(f.size()) + " fields");
        ProcessedRecord p;
        try {
            p.site = f[col[0]];
            p.time = parse_timestamp(f[col[1]]);
            double *dst[] = {&p.z,      &p.swe,    &p.rh,     &p.solar,  &p.wind,  &p.t_air,
                             &p.precip, &p.f_snow, &p.p_snow, &p.p_rain, &p.dz_dt, &p.dswe_dt};
            for (std::size_t c = 0; c < 12; ++c)
                *dst[c] = parse_double(f[col[c + 2]]);
        } catch (const DataError &e) {
            throw DataError("processed CSV line " + std::to_string(doc.line_numbers[r]) + ": " + e.what());
        }
        out.push_back(std::move(p));
    }
    return out;
}

void write_processed_file(const std::string &path, const std::vector<ProcessedRecord> &records, const Metadata &meta)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write '" + path + "'");
    write_processed_csv(out, records, meta);
}

std::vector<ProcessedRecord> read_processed_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    return read_processed_csv(in);
}

SimulationTable simulation_table(const SimulationResult &result, const SiteSeries &series)
{
    if (result.time.size() != series.records.size())
        throw ShapeError("simulation result does not match its series");
    SimulationTable t;
    t.site = result.site;
    t.time = result.time;
    t.z_obs = observed_z(series);
    t.swe_obs = observed_swe(series);
    t.z_hat = result.z_hat;
    t.swe_hat = result.coupled ? result.swe_hat : std::vector<std::optional<double>>(t.time.size());
    t.reset = result.reset;
    return t;
}

void write_simulation_csv(std::ostream &out, const SimulationTable &t, const Metadata &meta)
{
    write_metadata(out, meta);
    write_row(out, {"site", "date", "z_obs", "z_hat", "swe_obs", "swe_hat", "density_obs", "density_hat", "reset"});
    const auto d_obs = density_ratio(t.z_obs, t.swe_obs);
    const bool coupled = std::any_of(t.swe_hat.begin(), t.swe_hat.end(), [](const auto &v) { return v.has_value(); });
    const auto d_hat = density_ratio(t.z_hat, coupled ? t.swe_hat : t.swe_obs);
    for (std::size_t i = 0; i < t.time.size(); ++i)
        write_row(out, {t.site, format_timestamp(t.time[i]), format_optional(t.z_obs[i]), format_optional(t.z_hat[i]),
                        format_optional(t.swe_obs[i]), format_optional(t.swe_hat[i]), format_optional(d_obs[i]),
                        format_optional(d_hat[i]), t.reset[i] ? "1" : "0"});
}

SimulationTable read_simulation_csv(std::istream &in)
{
    const CsvDocument doc = read_csv(in);
    const std::size_t c_site = doc.require("site"), c_date = doc.require("date"), c_zo = doc.require("z_obs"),
                      c_zh = doc.require("z_hat"), c_so = doc.require("swe_obs"), c_sh = doc.require("swe_hat"),
                      c_r = doc.require("reset");
    SimulationTable t;
    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
        const auto &f = doc.rows[r];
        if (f.size() != doc.header.size())
            throw DataError("simulation CSV line " + std::to_string(doc.line_numbers[r]) + " is malformed");
        if (t.site.empty())
            t.site = f[c_site];
        else if (f[c_site] != t.site)
            throw DataError("simulation CSV mixes sites");
        t.time.push_back(parse_timestamp(f[c_date]));
        t.z_obs.push_back(parse_optional_double(f[c_zo]));
        t.z_hat.push_back(parse_optional_double(f[c_zh]));
        t.swe_obs.push_back(parse_optional_double(f[c_so]));
        t.swe_hat.push_back(parse_optional_double(f[c_sh]));
        t.reset.push_back(f[c_r] == "1");
    }
    return t;
}

void write_simulation_file(const std::string &path, const SimulationTable &table, const Metadata &meta)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write '" + path + "'");
    write_simulation_csv(out, table, meta);
}

SimulationTable read_simulation_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    return read_simulation_csv(in);
}

void write_metrics_csv(std::ostream &out, const std::vector<MetricRow> &rows, const Metadata &meta)
{
    write_metadata(out, meta);
    write_row(out, {"site", "variable", "series", "n", "rmse", "mae", "bias", "mpe_pct", "nse", "spe_pct",
                    "pearson_r"});
    auto pct = [](const std::optional<double> &v) {
        return v ? std::optional<double>(100.0 * *v) : std::nullopt;
    };
    for (const MetricRow &r : rows)
        write_row(out, {r.site, r.variable, r.series, std::to_string(r.report.n), format_double(r.report.rmse),
                        format_double(r.report.mae), format_double(r.report.bias), format_optional(pct(r.report.mpe)),
                        format_optional(r.report.nse), format_optional(pct(r.report.spe)),
                        format_optional(r.report.pearson_r)});
}

void write_ale_csv(std::ostream &out, const std::vector<AleCurve> &curves, const Metadata &meta)
{
    write_metadata(out, meta);
    write_row(out, {"feature", "x", "value", "count"});
    for (const AleCurve &c : curves)
        for (std::size_t j = 0; j < c.values.size(); ++j)
            write_row(out, {c.name.empty() ? std::to_string(c.feature) : c.name, format_double(c.edges[j + 1]),
                            format_double(c.values[j]), std::to_string(c.counts[j])});
}

void write_audit_csv(std::ostream &out, const AuditLog &audit, const Metadata &meta)
{
    write_metadata(out, meta);
    write_row(out, {"type", "key", "value"});
    for (const auto &[k, c] : audit.counts)
        write_row(out, {"count", k, std::to_string(c)});
    for (const std::string &n : audit.notices)
        write_row(out, {"notice", "", n});
    for (const std::string &r : audit.rejections)
        write_row(out, {"rejection", "", r});
}

} // namespace snowode
