#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cmmd/tensor.hpp"

namespace cmmd {

// Plain-text key=value block used for configs and run manifests. Keys are
// written in insertion order so reruns produce byte-identical files; lines
// beginning with '#' are comments and excluded from hashing/comparison
// (timestamps live there).
class Manifest {
public:
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set(const std::string& key, std::uint64_t value);
    void set_comment(const std::string& text); // "# text" line, non-hashed

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;

    void write(std::ostream& out) const;
    static Manifest read(std::istream& in);

    void save(const std::string& path) const;
    static Manifest load(const std::string& path);

private:
    std::vector<std::string> lines_; // raw lines in order
    std::map<std::string, std::string> values_;
};

std::string format_double(double value); // shortest round-trippable form

// Named binary tensor block inside a mixed text/binary container:
// "tensor <name> <nbytes>\n" followed by a tensor dump.
void write_named_tensor(std::ostream& out, const std::string& name, const Tensor& t);
std::pair<std::string, Tensor> read_named_tensor(std::istream& in);

std::uint64_t fnv1a_file(const std::string& path);

std::vector<std::string> list_files(const std::string& dir, const std::string& suffix);

} // namespace cmmd
