/*******************************************************************************
* Copyright 2026 The nanoforge Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
*******************************************************************************/
#pragma once

#include <stdexcept>
#include <string>

namespace nanoforge {

enum class ErrorKind {
    Config,
    NonDivisible,
    NoFeasibleTiling,
    Spill,
    Validation,
    Render,
    Emulation,
    Shape,
};

inline const char *to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config: return "ConfigError";
        case ErrorKind::NonDivisible: return "NonDivisible";
        case ErrorKind::NoFeasibleTiling: return "NoFeasibleTiling";
        case ErrorKind::Spill: return "Spill";
        case ErrorKind::Validation: return "ValidationError";
        case ErrorKind::Render: return "RenderError";
        case ErrorKind::Emulation: return "EmulationError";
        case ErrorKind::Shape: return "ShapeMismatch";
    }
    return "Error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &msg)
        : std::runtime_error(std::string(to_string(kind)) + ": " + msg)
        , kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace nanoforge
