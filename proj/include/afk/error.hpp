// Copyright 2026 The AFK Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AFK_ERROR_HPP_
#define AFK_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace afk {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

#define AFK_DEFINE_ERROR(NAME)                                          \
  class NAME : public Error {                                           \
   public:                                                              \
    explicit NAME(const std::string& message) : Error(message) {}       \
  }

// rir-core
AFK_DEFINE_ERROR(ZeroEnergyError);
AFK_DEFINE_ERROR(BandOutOfRangeError);
AFK_DEFINE_ERROR(InsufficientDecayError);
AFK_DEFINE_ERROR(RateMismatchError);

// geometry
AFK_DEFINE_ERROR(MalformedMeshError);
AFK_DEFINE_ERROR(EmptyMeshError);
AFK_DEFINE_ERROR(InfeasibleSampleCountError);

// simulator
AFK_DEFINE_ERROR(CoincidentEndpointsError);
AFK_DEFINE_ERROR(OutOfRoomError);

// retrieval
AFK_DEFINE_ERROR(IoError);
AFK_DEFINE_ERROR(EmptyIndexError);
AFK_DEFINE_ERROR(DimensionMismatchError);
AFK_DEFINE_ERROR(NotEnoughRoomsError);
AFK_DEFINE_ERROR(NoGeometryAvailableError);

// nafield
AFK_DEFINE_ERROR(InvalidInputError);
AFK_DEFINE_ERROR(ShapeError);
AFK_DEFINE_ERROR(NumericalError);
AFK_DEFINE_ERROR(RankError);

// training
AFK_DEFINE_ERROR(MissingGeometryError);
AFK_DEFINE_ERROR(ConfigError);

#undef AFK_DEFINE_ERROR

}  // namespace afk

#endif  // AFK_ERROR_HPP_
