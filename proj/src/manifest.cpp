#include "cmmd/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cmmd {

std::string format_double(double value) {
    // Shortest representation that round-trips exactly.
    char buf[64];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
        double parsed = std::strtod(buf, nullptr);
        if (parsed == value) {
            break;
        }
    }
    return buf;
}

void Manifest::set(const std::string& key, const std::string& value) {
    if (values_.count(key)) {
        throw std::invalid_argument("Manifest: duplicate key " + key);
    }
    values_[key] = value;
    lines_.push_back(key + " = " + value);
}

void Manifest::set(const std::string& key, double value) {
    set(key, format_double(value));
}

void Manifest::set(const std::string& key, std::uint64_t value) {
    set(key, std::to_string(value));
}

void Manifest::set_comment(const std::string& text) {
    lines_.push_back("# " + text);
}

bool Manifest::has(const std::string& key) const {
    return values_.count(key) != 0;
}

const std::string& Manifest::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw std::runtime_error("Manifest: missing key " + key);
    }
    return it->second;
}

std::string Manifest::get_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Manifest::get_double(const std::string& key) const {
    return std::strtod(get(key).c_str(), nullptr);
}

std::uint64_t Manifest::get_u64(const std::string& key) const {
    return std::strtoull(get(key).c_str(), nullptr, 10);
}

void Manifest::write(std::ostream& out) const {
    for (const auto& line : lines_) {
        out << line << "\n";
    }
}

Manifest Manifest::read(std::istream& in) {
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            break; // blank line terminates the block
        }
        m.lines_.push_back(line);
        if (line[0] == '#') {
            continue;
        }
        auto pos = line.find(" = ");
        if (pos == std::string::npos) {
            throw std::runtime_error("Manifest: malformed line: " + line);
        }
        m.values_[line.substr(0, pos)] = line.substr(pos + 3);
    }
    return m;
}

void Manifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    write(out);
}

Manifest Manifest::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open for reading: " + path);
    }
    return read(in);
}

void write_named_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    std::ostringstream blob(std::ios::binary);
    write_tensor(blob, t);
    std::string bytes = blob.str();
    out << "tensor " << name << " " << bytes.size() << "\n";
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out << "\n";
}

std::pair<std::string, Tensor> read_named_tensor(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("named tensor: unexpected end of stream");
    }
    std::istringstream header(line);
    std::string tag, name;
    std::size_t nbytes = 0;
    header >> tag >> name >> nbytes;
    if (tag != "tensor" || name.empty()) {
        throw std::runtime_error("named tensor: malformed header: " + line);
    }
    Tensor t = read_tensor(in);
    in.get(); // trailing newline
    return {name, std::move(t)};
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open for hashing: " + path);
    }
    std::uint64_t hash = 1469598103934665603ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ULL;
        }
    }
    return hash;
}

std::vector<std::string> list_files(const std::string& dir, const std::string& suffix) {
    std::vector<std::string> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        std::string name = entry.path().filename().string();
        if (name.size() >= suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            out.push_back(entry.path().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace cmmd
