#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "isofuse/error.hpp"
#include "isofuse/likelihood.hpp"

namespace isofuse::io {

/// Grouped observations read from `group,x1,...,xm,y[,trials]`.
struct CsvData {
    std::vector<std::string> groups;  // in order of first appearance
    std::vector<Dataset> datasets;
    std::size_t dim = 0;
    bool has_trials = false;
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_number(std::string_view s, std::size_t line_no, std::string_view what)
{
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        fail(Errc::parse_error, "line " + std::to_string(line_no) + ": " + std::string(what) + " '" + std::string(s) +
                                    "' is not a finite number");
    }
    return v;
}

} // namespace detail

inline CsvData read_csv(std::istream& in, bool binomial)
{
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string_view> header;
    std::string header_line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty()) {
            header_line = line;
            break;
        }
    }
    if (header_line.empty()) fail(Errc::parse_error, "line 1: missing header");
    header = detail::split(header_line);
    CsvData data;
    data.has_trials = !header.empty() && header.back() == "trials";
    const std::size_t tail = data.has_trials ? 2 : 1;
    if (header.size() < 2 + tail || header.front() != "group" || header[header.size() - tail] != "y") {
        fail(Errc::parse_error, "line " + std::to_string(line_no) + ": header must be group,x1,...,xm,y[,trials]");
    }
    data.dim = header.size() - 1 - tail;
    for (std::size_t d = 0; d < data.dim; ++d) {
        if (header[1 + d] != "x" + std::to_string(d + 1)) {
            fail(Errc::parse_error, "line " + std::to_string(line_no) + ": expected column x" + std::to_string(d + 1));
        }
    }
    if (binomial && !data.has_trials) fail(Errc::parse_error, "binomial input needs a trials column");

    std::map<std::string, std::size_t, std::less<>> index;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto f = detail::split(line);
        if (f.size() != header.size()) {
            fail(Errc::parse_error, "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                                        " fields, found " + std::to_string(f.size()));
        }
        if (f.front().empty()) fail(Errc::parse_error, "line " + std::to_string(line_no) + ": empty group label");
        auto it = index.find(f.front());
        if (it == index.end()) {
            it = index.emplace(std::string(f.front()), data.groups.size()).first;
            data.groups.emplace_back(f.front());
            data.datasets.emplace_back();
            data.datasets.back().function_id = data.groups.size() - 1;
        }
        Observation obs;
        std::vector<double> x(data.dim);
        for (std::size_t d = 0; d < data.dim; ++d) x[d] = detail::parse_number(f[1 + d], line_no, "coordinate");
        obs.x = DesignPoint(std::move(x));
        obs.response = detail::parse_number(f[1 + data.dim], line_no, "response");
        if (data.has_trials) {
            const double t = detail::parse_number(f.back(), line_no, "trials");
            if (t < 1 || t != std::floor(t)) {
                fail(Errc::parse_error, "line " + std::to_string(line_no) + ": trials must be a positive integer");
            }
            obs.trials = static_cast<int>(t);
            if (binomial && (obs.response < 0 || obs.response > t || obs.response != std::floor(obs.response))) {
                fail(Errc::range_error, "line " + std::to_string(line_no) + ": y must be a count in [0, trials]");
            }
        }
        data.datasets[it->second].rows.push_back(std::move(obs));
    }
    if (data.groups.empty()) fail(Errc::empty_group, "input has no data rows");
    return data;
}

inline CsvData read_csv_file(const std::string& path, bool binomial)
{
    std::ifstream in(path);
    if (!in) fail(Errc::invalid_argument, "cannot open '" + path + "'");
    return read_csv(in, binomial);
}

} // namespace isofuse::io
