#!/usr/bin/env node
import { bridgeMain } from "./bridge";

process.exit(bridgeMain(process.argv.slice(2)));
