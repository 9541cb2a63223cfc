#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "mpt/errors.hpp"
#include "mpt/signature.hpp"

namespace mpt {

namespace {

constexpr const char* kColumns = "omega,re11,re22,re33,re12,re13,re23,im11,im22,im33,im12,im13,im23";

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, const std::string& context) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
    if (end == begin || *end != '\0') throw ParseError("cannot parse number '" + s + "' in " + context);
    return v;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

nlohmann::json to_json(const SpectralSignature& s) {
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& t : s.coefficients) {
        nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
        for (const auto& c : t.entries()) {
            re.push_back(c.real());
            im.push_back(c.imag());
        }
        coeffs.push_back({{"re", re}, {"im", im}});
    }
    return {{"alpha", s.alpha},           {"sigma", s.sigma},       {"mu_r", s.mu_r},
            {"geometry_id", s.geometry_id}, {"class_id", s.class_id}, {"frequencies", s.frequencies},
            {"coefficients", coeffs}};
}

SpectralSignature from_json(const nlohmann::json& j) {
    SpectralSignature s;
    try {
        s.alpha = j.at("alpha").get<double>();
        s.sigma = j.at("sigma").get<double>();
        s.mu_r = j.at("mu_r").get<double>();
        s.geometry_id = j.at("geometry_id").get<std::string>();
        s.class_id = j.at("class_id").get<int>();
        s.frequencies = j.at("frequencies").get<std::vector<double>>();
        for (const auto& c : j.at("coefficients")) {
            const auto re = c.at("re").get<std::vector<double>>();
            const auto im = c.at("im").get<std::vector<double>>();
            if (re.size() != 6 || im.size() != 6) throw ParseError("coefficient entry must have 6 re and 6 im values");
            std::array<std::complex<double>, 6> e{};
            for (int k = 0; k < 6; ++k) e[k] = {re[k], im[k]};
            s.coefficients.emplace_back(e);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed signature JSON: ") + ex.what());
    }
    return s;
}

}  // namespace

void SpectralSignature::validate() const {
    if (frequencies.empty()) throw ValidationError("signature has no frequencies");
    if (coefficients.size() != frequencies.size())
        throw ValidationError("signature needs one tensor per frequency (" + std::to_string(coefficients.size()) +
                              " tensors, " + std::to_string(frequencies.size()) + " frequencies)");
    for (std::size_t i = 0; i < frequencies.size(); ++i) {
        if (!(frequencies[i] > 0.0) || !std::isfinite(frequencies[i]))
            throw ValidationError("frequencies must be finite and positive");
        if (i > 0 && !(frequencies[i] > frequencies[i - 1]))
            throw ValidationError("frequencies must be strictly increasing");
    }
    if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
    if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
    if (!(mu_r >= 1.0)) throw ValidationError("mu_r must be >= 1");
}

SignatureFormat format_from_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return SignatureFormat::Csv;
    if (ext == ".json") return SignatureFormat::Json;
    throw ValidationError("unknown signature format for " + path.string());
}

std::string empty_signature_csv() { return std::string(kColumns) + "\n"; }

std::string format_signature_csv(const SpectralSignature& sig) {
    std::string out;
    out += "# alpha=" + fmt17(sig.alpha) + "\n";
    out += "# sigma=" + fmt17(sig.sigma) + "\n";
    out += "# mu_r=" + fmt17(sig.mu_r) + "\n";
    out += "# geometry_id=" + sig.geometry_id + "\n";
    out += "# class_id=" + std::to_string(sig.class_id) + "\n";
    out += kColumns;
    out += "\n";
    for (std::size_t m = 0; m < sig.frequencies.size(); ++m) {
        out += fmt17(sig.frequencies[m]);
        for (const auto& c : sig.coefficients[m].entries()) out += "," + fmt17(c.real());
        for (const auto& c : sig.coefficients[m].entries()) out += "," + fmt17(c.imag());
        out += "\n";
    }
    return out;
}

SpectralSignature parse_signature_csv(const std::string& text) {
    SpectralSignature sig;
    std::istringstream in(text);
    std::string line;
    bool have_columns = false;
    bool seen[5] = {false, false, false, false, false};
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno);
        if (line[0] == '#') {
            const auto body = trim(line.substr(1));
            const auto eq = body.find('=');
            if (eq == std::string::npos) continue;  // free comment
            const auto key = trim(body.substr(0, eq));
            const auto value = trim(body.substr(eq + 1));
            if (key == "alpha") sig.alpha = parse_double(value, where), seen[0] = true;
            else if (key == "sigma") sig.sigma = parse_double(value, where), seen[1] = true;
            else if (key == "mu_r") sig.mu_r = parse_double(value, where), seen[2] = true;
            else if (key == "geometry_id") sig.geometry_id = value, seen[3] = true;
            else if (key == "class_id") sig.class_id = static_cast<int>(parse_double(value, where)), seen[4] = true;
            continue;
        }
        if (!have_columns) {
            std::string compact;
            for (char c : line)
                if (c != ' ') compact += c;
            if (compact != kColumns) throw ParseError("unexpected column header at " + where);
            have_columns = true;
            continue;
        }
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(parse_double(trim(cell), where));
        if (row.size() != 13) throw ParseError("expected 13 columns at " + where + ", got " + std::to_string(row.size()));
        std::array<std::complex<double>, 6> e{};
        for (int k = 0; k < 6; ++k) e[k] = {row[1 + k], row[7 + k]};
        sig.frequencies.push_back(row[0]);
        sig.coefficients.emplace_back(e);
    }
    if (!have_columns) throw ParseError("missing column header");
    const char* names[5] = {"alpha", "sigma", "mu_r", "geometry_id", "class_id"};
    for (int k = 0; k < 5; ++k)
        if (!seen[k]) throw ParseError(std::string("missing header line '# ") + names[k] + "=...'");
    sig.validate();
    return sig;
}

std::vector<SpectralSignature> load_signatures(const std::filesystem::path& path, SignatureFormat format) {
    const std::string text = read_file(path);
    if (format == SignatureFormat::Csv) {
        // A header-only file is the empty list.
        std::istringstream in(text);
        std::string line;
        bool any_data = false, any_meta = false;
        while (std::getline(in, line)) {
            line = trim(line);
            if (line.empty()) continue;
            if (line[0] == '#') any_meta = true;
            else if (line.rfind("omega", 0) != 0) any_data = true;
        }
        if (!any_data && !any_meta) return {};
        return {parse_signature_csv(text)};
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(path.string() + ": " + ex.what());
    }
    if (!j.is_array()) throw ParseError(path.string() + ": expected a JSON array of signatures");
    std::vector<SpectralSignature> out;
    for (const auto& item : j) {
        out.push_back(from_json(item));
        out.back().validate();
    }
    return out;
}

void write_signatures(const std::vector<SpectralSignature>& signatures, const std::filesystem::path& path,
                      SignatureFormat format) {
    for (const auto& s : signatures) s.validate();
    if (format == SignatureFormat::Csv) {
        if (signatures.size() > 1) throw ValidationError("CSV signature files hold one signature each");
        write_file(path, signatures.empty() ? empty_signature_csv() : format_signature_csv(signatures.front()));
        return;
    }
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : signatures) j.push_back(to_json(s));
    write_file(path, j.dump(1) + "\n");
}

}  // namespace mpt
