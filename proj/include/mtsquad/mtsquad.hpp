#pragma once

#include "mtsquad/dataset.hpp"
#include "mtsquad/errors.hpp"
#include "mtsquad/eval.hpp"
#include "mtsquad/locate.hpp"
#include "mtsquad/morph.hpp"
#include "mtsquad/pipeline.hpp"
#include "mtsquad/translate.hpp"
#include "mtsquad/unicode.hpp"
