/*
 * Copyright 2026 The medalloc Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MEDALLOC_MEDALLOC_HPP_
#define MEDALLOC_MEDALLOC_HPP_

#include "medalloc/allocator.hpp"
#include "medalloc/decision_weights.hpp"
#include "medalloc/feature_table.hpp"
#include "medalloc/forest.hpp"
#include "medalloc/ingest.hpp"
#include "medalloc/linear_model.hpp"
#include "medalloc/pipeline.hpp"
#include "medalloc/synth.hpp"

#endif  // MEDALLOC_MEDALLOC_HPP_
