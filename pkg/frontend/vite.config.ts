import { defineConfig } from 'vite';

// The bundle is served by the gateway at /console (or any static host);
// during development the proxy forwards API calls to a locally running
// gateway (dpgateway serve --port 8080).
export default defineConfig({
  base: '/console/',
  build: { outDir: 'dist', sourcemap: false },
  server: {
    proxy: {
      '/api': 'http://127.0.0.1:8080',
    },
  },
});
