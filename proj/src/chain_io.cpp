#include "batrank/chain_io.hpp"

#include <bit>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace batrank {

namespace {

using nlohmann::json;

constexpr char kMagic[] = "BATRANK-DRAWS 1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

static_assert(std::endian::native == std::endian::little, "draw files assume a little-endian host");

std::uint64_t parse_hex64(const std::string& s) {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 16);
    if (used != s.size()) throw ChainIoError("bad hash '" + s + "'");
    return v;
}

json prior_to_json(const PriorConfig& p) {
    return {{"m_mu", p.m_mu},
            {"s_mu", p.s_mu},
            {"a_sigma", p.a_sigma},
            {"b_sigma", p.b_sigma},
            {"a_delta", p.a_delta},
            {"b_delta", p.b_delta},
            {"game_effect_sd", p.game_effect_sd},
            {"alpha1_mean", p.alpha1_mean},
            {"alpha1_var", p.alpha1_var},
            {"alpha2_logmean", p.alpha2_logmean},
            {"alpha2_logvar", p.alpha2_logvar},
            {"eta_logmean", p.eta_logmean},
            {"eta_logvar", p.eta_logvar},
            {"a_pi", p.a_pi},
            {"b_pi", p.b_pi}};
}

PriorConfig prior_from_json(const json& j) {
    PriorConfig p;
    p.m_mu = j.at("m_mu");
    p.s_mu = j.at("s_mu");
    p.a_sigma = j.at("a_sigma");
    p.b_sigma = j.at("b_sigma");
    p.a_delta = j.at("a_delta");
    p.b_delta = j.at("b_delta");
    p.game_effect_sd = j.at("game_effect_sd");
    p.alpha1_mean = j.at("alpha1_mean");
    p.alpha1_var = j.at("alpha1_var");
    p.alpha2_logmean = j.at("alpha2_logmean");
    p.alpha2_logvar = j.at("alpha2_logvar");
    p.eta_logmean = j.at("eta_logmean");
    p.eta_logvar = j.at("eta_logvar");
    p.a_pi = j.at("a_pi");
    p.b_pi = j.at("b_pi");
    return p;
}

json config_to_json(const ChainConfig& c) {
    return {{"n_iter", c.n_iter},
            {"burn_in", c.burn_in},
            {"thin", c.thin},
            {"seed", c.seed},
            {"step_sizes", c.step_sizes},
            {"adapt", c.adapt},
            {"newton_max_iter", c.newton_max_iter},
            {"newton_tol", c.newton_tol},
            {"blocks", c.blocks}};
}

ChainConfig config_from_json(const json& j) {
    ChainConfig c;
    c.n_iter = j.at("n_iter");
    c.burn_in = j.at("burn_in");
    c.thin = j.at("thin");
    c.seed = j.at("seed");
    c.step_sizes = j.at("step_sizes").get<std::map<std::string, double>>();
    c.adapt = j.at("adapt");
    c.newton_max_iter = j.at("newton_max_iter");
    c.newton_tol = j.at("newton_tol");
    c.blocks = j.at("blocks");
    return c;
}

json dims_to_json(const Dims& d) {
    return {{"players", d.players}, {"years", d.years}, {"decades", d.decades}, {"oppositions", d.oppositions}};
}

Dims dims_from_json(const json& j) {
    return Dims{j.at("players"), j.at("years"), j.at("decades"), j.at("oppositions")};
}

json header_json(const ChainOutput& m) {
    return {{"format", "batrank-draws"},
            {"version", 1},
            {"config", config_to_json(m.config)},
            {"prior", prior_to_json(m.prior)},
            {"dataset_fingerprint", hex64(m.dataset_fingerprint)},
            {"config_hash", hex64(m.config_hash)},
            {"dims", dims_to_json(m.dims)},
            {"flat_size", ParamState::flat_size(m.dims)},
            {"player_ids", m.player_ids},
            {"opposition_labels", m.opposition_labels},
            {"first_year", m.first_year},
            {"decade_start", m.decade_start}};
}

void apply_header(const json& h, ChainOutput& m) {
    m.config = config_from_json(h.at("config"));
    m.prior = prior_from_json(h.at("prior"));
    m.dataset_fingerprint = parse_hex64(h.at("dataset_fingerprint"));
    m.config_hash = parse_hex64(h.at("config_hash"));
    m.dims = dims_from_json(h.at("dims"));
    m.player_ids = h.at("player_ids").get<std::vector<std::string>>();
    m.opposition_labels = h.at("opposition_labels").get<std::vector<std::string>>();
    m.first_year = h.at("first_year");
    m.decade_start = h.at("decade_start").get<std::vector<int>>();
}

std::string header_blob(const ChainOutput& meta) {
    const std::string text = header_json(meta).dump();
    std::string blob(kMagic, kMagicLen);
    const std::uint64_t len = text.size();
    blob.append(reinterpret_cast<const char*>(&len), sizeof len);
    blob += text;
    return blob;
}

// Returns the header and the byte offset of the first draw.
std::pair<json, std::uint64_t> read_header(std::istream& in, const std::filesystem::path& path) {
    std::string magic(kMagicLen, '\0');
    in.read(magic.data(), static_cast<std::streamsize>(kMagicLen));
    if (!in || magic != std::string(kMagic, kMagicLen)) {
        throw ChainIoError(path.string() + " is not a draws file");
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || len > (1ULL << 32)) throw ChainIoError(path.string() + ": corrupt header");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw ChainIoError(path.string() + ": truncated header");
    try {
        return {json::parse(text), kMagicLen + sizeof len + len};
    } catch (const json::exception& e) {
        throw ChainIoError(path.string() + ": bad header: " + e.what());
    }
}

json state_to_json(const ParamState& s) {
    return {{"n_decades", s.n_decades}, {"dims", dims_to_json(s.dims())}, {"flat", s.flatten()}};
}

ParamState state_from_json(const json& j) {
    const Dims d = dims_from_json(j.at("dims"));
    ParamState s = ParamState::unflatten(j.at("flat").get<std::vector<double>>(), d);
    s.n_decades = j.at("n_decades");
    return s;
}

json steps_to_json(const StepSizes& s) {
    return {{"theta", s.theta}, {"alpha1", s.alpha1}, {"log_alpha2", s.log_alpha2}, {"log_eta", s.log_eta},
            {"logit_pi", s.logit_pi}, {"zeta2", s.zeta2}, {"nu", s.nu}, {"xi", s.xi}, {"omega", s.omega},
            {"delta", s.delta}};
}

StepSizes steps_from_json(const json& j) {
    StepSizes s;
    s.theta = j.at("theta").get<std::vector<double>>();
    s.alpha1 = j.at("alpha1").get<std::vector<double>>();
    s.log_alpha2 = j.at("log_alpha2").get<std::vector<double>>();
    s.log_eta = j.at("log_eta").get<std::vector<double>>();
    s.logit_pi = j.at("logit_pi").get<std::vector<double>>();
    s.zeta2 = j.at("zeta2");
    s.nu = j.at("nu").get<std::vector<double>>();
    s.xi = j.at("xi").get<std::vector<double>>();
    s.omega = j.at("omega").get<std::vector<double>>();
    s.delta = j.at("delta").get<std::vector<double>>();
    return s;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ChainIoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ChainIoError("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw ChainIoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw ChainIoError("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

DrawWriter::DrawWriter(const std::filesystem::path& path, const ChainOutput& meta)
    : path_(path), flat_size_(ParamState::flat_size(meta.dims)) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw ChainIoError("cannot write " + path.string());
    out_ << header_blob(meta);
    if (!out_) throw ChainIoError("write failed: " + path.string());
}

DrawWriter::DrawWriter(const std::filesystem::path& path, const ChainOutput& meta, std::uint64_t keep_draws)
    : path_(path), flat_size_(ParamState::flat_size(meta.dims)), count_(keep_draws) {
    const std::string blob = header_blob(meta);
    std::uint64_t offset = 0;
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ChainIoError("cannot open " + path.string() + " for resume");
        auto [h, off] = read_header(in, path);
        if (h.at("config_hash") != hex64(meta.config_hash)) {
            throw ChainIoError(path.string() + " belongs to a different run");
        }
        offset = off;
    }
    const std::uint64_t want = offset + keep_draws * flat_size_ * sizeof(double);
    if (std::filesystem::file_size(path) < want) {
        throw ChainIoError(path.string() + " holds fewer draws than the checkpoint records");
    }
    std::filesystem::resize_file(path, want);
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) throw ChainIoError("cannot append to " + path.string());
}

void DrawWriter::write(const ParamState& s) {
    const auto flat = s.flatten();
    if (flat.size() != flat_size_) throw ChainIoError("draw has the wrong size");
    out_.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!out_) throw ChainIoError("write failed: " + path_.string());
    ++count_;
}

void DrawWriter::flush() {
    out_.flush();
    if (!out_) throw ChainIoError("flush failed: " + path_.string());
}

ChainOutput read_chain_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ChainIoError("cannot open " + path.string());
    ChainOutput out;
    try {
        apply_header(read_header(in, path).first, out);
    } catch (const json::exception& e) {
        throw ChainIoError(path.string() + ": bad header: " + e.what());
    }
    return out;
}

ChainOutput read_chain(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ChainIoError("cannot open " + path.string());
    auto [h, offset] = read_header(in, path);
    ChainOutput out;
    try {
        apply_header(h, out);
    } catch (const json::exception& e) {
        throw ChainIoError(path.string() + ": bad header: " + e.what());
    }
    const std::size_t flat = ParamState::flat_size(out.dims);
    const auto bytes = std::filesystem::file_size(path) - offset;
    const std::size_t block = flat * sizeof(double);
    if (bytes % block != 0) throw ChainIoError(path.string() + ": trailing partial draw");
    const std::size_t n = bytes / block;
    std::vector<double> buf(flat);
    out.draws.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(block));
        if (!in) throw ChainIoError(path.string() + ": truncated draw");
        ParamState s = ParamState::unflatten(buf, out.dims);
        out.draws.push_back(std::move(s));
    }

    const auto sp = summary_path(path);
    if (std::filesystem::exists(sp)) {
        try {
            const json j = json::parse(read_file(sp));
            out.acceptance_rates = j.at("acceptance_rates").get<std::map<std::string, double>>();
            out.delta_fallbacks = j.at("delta_fallbacks");
        } catch (const json::exception& e) {
            throw ChainIoError(sp.string() + ": " + e.what());
        }
    }
    return out;
}

std::string summary_json(const ChainOutput& out) {
    json j = header_json(out);
    j["format"] = "batrank-summary";
    j["n_draws"] = out.draws.empty() ? out.config.n_draws() : out.draws.size();
    j["acceptance_rates"] = out.acceptance_rates;
    j["delta_fallbacks"] = out.delta_fallbacks;
    return j.dump(2) + "\n";
}

void write_summary(const std::filesystem::path& path, const ChainOutput& out) {
    write_file_atomic(path, summary_json(out));
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    json counts = json::object();
    for (std::size_t s = 0; s < c.counts.size(); ++s) {
        counts[stat_name(static_cast<Stat>(s))] = {c.counts[s].accepted, c.counts[s].proposed};
    }
    const json j = {{"format", "batrank-checkpoint"},
                    {"version", 1},
                    {"next_iter", c.next_iter},
                    {"state", state_to_json(c.state)},
                    {"steps", steps_to_json(c.steps)},
                    {"counts", counts},
                    {"delta_fallbacks", c.delta_fallbacks},
                    {"draws_written", c.draws_written},
                    {"seed", c.seed},
                    {"config_hash", hex64(c.config_hash)}};
    write_file_atomic(path, j.dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Checkpoint c;
    try {
        const json j = json::parse(read_file(path));
        if (j.at("format") != "batrank-checkpoint") throw ChainIoError(path.string() + " is not a checkpoint");
        c.next_iter = j.at("next_iter");
        c.state = state_from_json(j.at("state"));
        c.steps = steps_from_json(j.at("steps"));
        for (std::size_t s = 0; s < c.counts.size(); ++s) {
            const auto& e = j.at("counts").at(stat_name(static_cast<Stat>(s)));
            c.counts[s].accepted = e.at(0);
            c.counts[s].proposed = e.at(1);
        }
        c.delta_fallbacks = j.at("delta_fallbacks");
        c.draws_written = j.at("draws_written");
        c.seed = j.at("seed");
        c.config_hash = parse_hex64(j.at("config_hash"));
    } catch (const json::exception& e) {
        throw ChainIoError(path.string() + ": " + e.what());
    }
    return c;
}

std::filesystem::path draws_path(const std::filesystem::path& dir, std::size_t chain) {
    return dir / ("chain" + std::to_string(chain + 1) + ".draws");
}

std::filesystem::path summary_path(const std::filesystem::path& draws) {
    auto p = draws;
    p.replace_extension(".json");
    return p;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t chain) {
    return dir / ("chain" + std::to_string(chain + 1) + ".ckpt.json");
}

}  // namespace batrank
