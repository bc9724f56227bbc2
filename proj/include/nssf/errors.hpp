/* Copyright 2026 The nssf Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <stdexcept>
#include <string>

namespace nssf {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define NSSF_DEFINE_ERROR(Name)                                   \
  struct Name : Error {                                           \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
  }

NSSF_DEFINE_ERROR(NoUtterances);
NSSF_DEFINE_ERROR(UnsupportedFormat);
NSSF_DEFINE_ERROR(GeometryError);
NSSF_DEFINE_ERROR(SignalTooShort);
NSSF_DEFINE_ERROR(ShapeError);
NSSF_DEFINE_ERROR(DomainError);
NSSF_DEFINE_ERROR(DatasetError);
NSSF_DEFINE_ERROR(DegenerateTarget);
NSSF_DEFINE_ERROR(StageError);
NSSF_DEFINE_ERROR(DegenerateSequence);
NSSF_DEFINE_ERROR(IoError);

#undef NSSF_DEFINE_ERROR

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace nssf
