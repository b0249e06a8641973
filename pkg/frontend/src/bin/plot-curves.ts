#!/usr/bin/env node
import { runCurves } from "../cli.js";

process.exit(runCurves(process.argv.slice(2)));
