/*
   Copyright 2026 The nctlab Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>
#include <system_error>
#include <type_traits>

namespace nct {

/// Shortest round-trip decimal form of x. Output depends only on the value,
/// so equal results always serialize to equal bytes.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

/// Writes a comma-separated row of doubles.
template <class... Ts>
void write_row(std::ostream& out, const Ts&... values) {
    bool first = true;
    auto put = [&](const auto& v) {
        if (!first) out << ',';
        first = false;
        if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>)
            out << format_double(static_cast<double>(v));
        else
            out << v;
    };
    (put(values), ...);
    out << '\n';
}

}  // namespace nct
